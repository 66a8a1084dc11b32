#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "customs/dates.hpp"
#include "customs/declaration.hpp"
#include "customs/features.hpp"
#include "customs/metrics.hpp"
#include "customs/model.hpp"
#include "customs/rng.hpp"
#include "customs/selection.hpp"

namespace customs {

inline constexpr double kWeeklyDecayStep = 0.10;

struct InspectionPlan {
    enum class Kind { constant, fast_linear_decay };
    Kind kind = Kind::constant;
    double initial_rate = 0.0;
    double final_rate = 0.0;

    double rate_for_week(int week) const {
        if (kind == Kind::constant) return final_rate;
        return std::max(final_rate, initial_rate - kWeeklyDecayStep * week);
    }

    // First simulated week whose rate already equals the final rate.
    int first_week_at_final_rate() const {
        if (kind == Kind::constant) return 0;
        return static_cast<int>(
            std::ceil((initial_rate - final_rate) / kWeeklyDecayStep - 1e-9));
    }
};

inline InspectionPlan make_plan(const std::string& name, double initial_rate, double final_rate) {
    if (!(final_rate > 0.0) || final_rate > initial_rate || initial_rate > 1.0)
        throw std::invalid_argument("inspection plan: need 0 < final <= initial <= 1");
    InspectionPlan plan;
    plan.initial_rate = initial_rate;
    plan.final_rate = final_rate;
    if (name == "constant") {
        if (std::abs(initial_rate - final_rate) > 1e-12)
            throw std::invalid_argument("constant plan: initial and final rates must match");
        plan.kind = InspectionPlan::Kind::constant;
    } else if (name == "fast_linear_decay") {
        plan.kind = InspectionPlan::Kind::fast_linear_decay;
    } else {
        throw std::invalid_argument("unknown inspection plan: " + name);
    }
    return plan;
}

struct SimulationConfig {
    std::vector<LabeledDeclaration> data;
    Date train_from;  // start of the fully labeled warm-up window
    Date test_from;   // first simulated week; warm-up is [train_from, test_from)
    int num_weeks = 0;
    int test_length_days = 7;   // width of one selection window
    int valid_length_days = 28; // validation lookback before the current window
    InspectionPlan plan;
    StrategySpec strategy;
    TrainConfig train;  // per-week seed is derived, the seed field here is ignored
    double risk_percentile = 0.9;
    uint64_t seed = 0;
    // Test hook: given (batch pool-indices, pool, k) returns positions within
    // the batch; replaces the strategy when set.
    std::function<std::vector<int>(const std::vector<std::size_t>&,
                                   const std::vector<LabeledDeclaration>&, int)>
        selector_override;
};

struct WeeklyReport {
    int week_index = 0;  // 0-based simulated week
    Date start_date;
    Date end_date;
    int batch_size = 0;
    int budget = 0;
    int selected_count = 0;
    double inspection_rate = 0.0;
    int training_size = 0;
    int validation_size = 0;
    bool model_fallback = false;
    MetricValue raw_precision, raw_revenue;
    MetricValue oracle_precision, oracle_revenue;
    MetricValue norm_precision, norm_revenue;
    long long illicit_found = 0;
    double revenue_captured = 0.0;
    std::map<std::string, int> provenance_counts;
    std::string gate_branch;
};

struct RunResult {
    std::vector<WeeklyReport> weeks;
    long long hidden_label_reads = 0;  // nonzero means training touched a hidden label
    int ledger_violations = 0;         // duplicate / out-of-batch reveals
    std::size_t initial_revealed = 0;
    std::vector<std::vector<std::size_t>> ledger;  // pool indices revealed per week
    ModelSnapshot final_model;                     // last week's trained model
};

struct RunSummary {
    MetricValue norm_precision_mean, norm_revenue_mean;  // whole run
    MetricValue post_decay_norm_precision, post_decay_norm_revenue;
    int post_decay_from_week = 0;
};

inline int weekly_budget(int batch_size, double rate) {
    if (batch_size <= 0) return 0;
    const int k = static_cast<int>(std::floor(rate * batch_size + 1e-9));
    return std::min(batch_size, std::max(1, k));
}

// Weekly loop: retrain from scratch on everything revealed so far, score the
// incoming week, spend the budget, reveal only what was inspected, and grade
// the picks against the full batch ground truth.
inline RunResult run_simulation(SimulationConfig cfg) {
    if (cfg.num_weeks < 1) throw std::invalid_argument("simulation: num_weeks must be >= 1");
    if (!(cfg.train_from < cfg.test_from))
        throw std::invalid_argument("simulation: train_from must precede test_from");
    if (cfg.test_length_days < 1)
        throw std::invalid_argument("simulation: test_length_days must be >= 1");
    if (cfg.valid_length_days < 1)
        throw std::invalid_argument("simulation: valid_length_days must be >= 1");
    if (!(cfg.risk_percentile >= 0.0 && cfg.risk_percentile <= 1.0))
        throw std::invalid_argument("simulation: risk_percentile out of [0,1]");

    std::vector<LabeledDeclaration>& pool = cfg.data;
    RunResult out;
    LabelAudit audit;

    std::vector<std::size_t> revealed;  // append-only reveal order
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const Date d = pool[i].decl.sgd_date;
        if (cfg.train_from <= d && d < cfg.test_from) {
            pool[i].reveal();
            revealed.push_back(i);
        }
    }
    out.initial_revealed = revealed.size();

    std::vector<std::vector<std::size_t>> batches(static_cast<std::size_t>(cfg.num_weeks));
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const int offset = pool[i].decl.sgd_date - cfg.test_from;
        if (offset < 0) continue;
        const int w = offset / cfg.test_length_days;
        if (w >= cfg.num_weeks) continue;
        batches[static_cast<std::size_t>(w)].push_back(i);
    }
    for (auto& b : batches)
        std::stable_sort(b.begin(), b.end(), [&](std::size_t a, std::size_t c) {
            return pool[a].decl.sgd_date < pool[c].decl.sgd_date;
        });

    out.ledger.resize(static_cast<std::size_t>(cfg.num_weeks));
    for (int t = 0; t < cfg.num_weeks; ++t) {
        WeeklyReport rep;
        rep.week_index = t;
        rep.start_date = cfg.test_from + t * cfg.test_length_days;
        rep.end_date = rep.start_date + cfg.test_length_days - 1;
        rep.inspection_rate = cfg.plan.rate_for_week(t);

        std::vector<LabeledDeclaration> window;
        window.reserve(revealed.size());
        for (std::size_t i : revealed) window.push_back(pool[i]);
        rep.training_size = static_cast<int>(window.size());

        const std::vector<std::size_t>& batch = batches[static_cast<std::size_t>(t)];
        rep.batch_size = static_cast<int>(batch.size());
        rep.budget = weekly_budget(rep.batch_size, rep.inspection_rate);
        if (rep.batch_size == 0) {
            // Nothing to select or learn from this week; keep the row.
            rep.raw_precision = {0.0, true};
            rep.raw_revenue = {0.0, true};
            rep.oracle_precision = {0.0, true};
            rep.oracle_revenue = {0.0, true};
            rep.norm_precision = {0.0, true};
            rep.norm_revenue = {0.0, true};
            out.weeks.push_back(std::move(rep));
            continue;
        }

        const FeatureEncoder encoder = FeatureEncoder::fit(window, audit, cfg.risk_percentile);

        std::vector<Example> examples;
        std::vector<std::size_t> example_window_idx;
        examples.reserve(window.size());
        for (std::size_t j = 0; j < window.size(); ++j) {
            const InspectionLabel* y = window[j].training_label(audit);
            if (!y) continue;  // counted by the audit; must not happen
            examples.push_back({encoder.encode(window[j].decl), y->illicit, y->revenue});
            example_window_idx.push_back(j);
        }
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, static_cast<uint64_t>(t), SeedRole::train);
        TrainResult trained;
        if (examples.empty()) {
            // No inspected history yet; score everything at the uninformed prior.
            trained.model = constant_fallback_model(kFeatureDim, tc.hidden_dim, 0.5, 0.0);
        } else {
            trained = train_model(examples, tc);
        }
        rep.model_fallback = trained.model.constant_fallback;
        out.final_model = trained.model;

        const Date valid_cutoff = rep.start_date - cfg.valid_length_days;
        std::vector<Example> validation;
        for (std::size_t e = 0; e < examples.size(); ++e) {
            if (window[example_window_idx[e]].decl.sgd_date < valid_cutoff) continue;
            validation.push_back(examples[e]);
        }
        rep.validation_size = static_cast<int>(validation.size());

        std::vector<Prediction> preds;
        preds.reserve(batch.size());
        for (std::size_t i : batch) preds.push_back(predict(trained.model, encoder.encode(pool[i].decl)));

        SelectionResult sel;
        if (cfg.selector_override) {
            sel.indices = cfg.selector_override(batch, pool, rep.budget);
            sel.provenance.assign(sel.indices.size(), "override");
        } else {
            SelectionInput input;
            input.predictions = &preds;
            input.budget = rep.budget;
            input.select_seed = derive_seed(cfg.seed, static_cast<uint64_t>(t), SeedRole::select);
            input.tiebreak_seed = derive_seed(cfg.seed, static_cast<uint64_t>(t), SeedRole::tiebreak);
            input.model = &trained.model;
            input.validation = &validation;
            input.week_inspection_rate = rep.inspection_rate;
            sel = select(cfg.strategy, input);
        }
        rep.gate_branch = sel.gate_branch;
        rep.selected_count = static_cast<int>(sel.indices.size());
        for (const auto& tag : sel.provenance) rep.provenance_counts[tag] += 1;

        std::vector<InspectionLabel> batch_labels;
        batch_labels.reserve(batch.size());
        for (std::size_t i : batch) batch_labels.push_back(pool[i].oracle_label());

        std::vector<InspectionLabel> selected_labels;
        std::vector<char> seen(batch.size(), 0);
        for (std::size_t j = 0; j < sel.indices.size(); ++j) {
            const int local = sel.indices[j];
            if (local < 0 || local >= rep.batch_size || seen[static_cast<std::size_t>(local)]) {
                ++out.ledger_violations;
                continue;
            }
            seen[static_cast<std::size_t>(local)] = 1;
            const std::size_t pool_idx = batch[static_cast<std::size_t>(local)];
            if (pool[pool_idx].label_visible()) {
                ++out.ledger_violations;
                continue;
            }
            selected_labels.push_back(batch_labels[static_cast<std::size_t>(local)]);
            pool[pool_idx].reveal();
            revealed.push_back(pool_idx);
            out.ledger[static_cast<std::size_t>(t)].push_back(pool_idx);
        }

        rep.raw_precision = precision_at(selected_labels);
        rep.raw_revenue = revenue_at(selected_labels, batch_labels);
        rep.oracle_precision = oracle_precision_at(batch_labels, rep.budget);
        rep.oracle_revenue = oracle_revenue_at(batch_labels, rep.budget);
        rep.norm_precision = normalize(rep.raw_precision, rep.oracle_precision);
        rep.norm_revenue = normalize(rep.raw_revenue, rep.oracle_revenue);
        for (const auto& y : selected_labels) {
            rep.illicit_found += y.illicit ? 1 : 0;
            rep.revenue_captured += y.revenue;
        }
        out.weeks.push_back(std::move(rep));
    }

    out.hidden_label_reads = audit.hidden_reads;
    return out;
}

inline RunSummary summarize(const RunResult& result, const InspectionPlan& plan) {
    RunSummary s;
    std::vector<MetricValue> np, nr, post_np, post_nr;
    s.post_decay_from_week = plan.first_week_at_final_rate() + 1;
    for (const auto& w : result.weeks) {
        np.push_back(w.norm_precision);
        nr.push_back(w.norm_revenue);
        if (w.week_index >= s.post_decay_from_week) {
            post_np.push_back(w.norm_precision);
            post_nr.push_back(w.norm_revenue);
        }
    }
    s.norm_precision_mean = mean_unflagged(np);
    s.norm_revenue_mean = mean_unflagged(nr);
    s.post_decay_norm_precision = mean_unflagged(post_np);
    s.post_decay_norm_revenue = mean_unflagged(post_nr);
    return s;
}

}  // namespace customs
