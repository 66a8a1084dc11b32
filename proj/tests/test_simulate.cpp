#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "customs/simulate.hpp"
#include "customs/synthgen.hpp"

using namespace customs;

namespace {

std::vector<LabeledDeclaration> stream(uint64_t seed, int num_items, int num_weeks) {
    GeneratorConfig cfg;
    cfg.num_items = num_items;
    cfg.num_weeks = num_weeks;
    cfg.num_importers = 800;
    cfg.num_declarants = 200;
    cfg.num_tariff_codes = 100;
    cfg.num_countries = 30;
    cfg.num_offices = 10;
    cfg.seed = seed;
    return generate(cfg);
}

SimulationConfig base_config(std::vector<LabeledDeclaration> data, int num_weeks) {
    SimulationConfig cfg;
    cfg.data = std::move(data);
    cfg.train_from = Date::from_ymd(2013, 1, 1);
    cfg.test_from = cfg.train_from + 28;
    cfg.num_weeks = num_weeks;
    cfg.plan = make_plan("fast_linear_decay", 1.0, 0.1);
    cfg.strategy = make_strategy("hybrid", "DATE/gate", "0.9/0.1");
    cfg.train.epochs = 4;
    cfg.train.hidden_dim = 8;
    cfg.seed = 42;
    return cfg;
}

}  // namespace

TEST_CASE("the decay plan walks down to the final rate and stays", "[simulate]") {
    const auto plan = make_plan("fast_linear_decay", 1.0, 0.1);
    const double expect[] = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.1, 0.1};
    for (int w = 0; w < 12; ++w) REQUIRE(plan.rate_for_week(w) == Catch::Approx(expect[w]));
    REQUIRE(plan.first_week_at_final_rate() == 9);

    const auto half = make_plan("fast_linear_decay", 0.5, 0.1);
    REQUIRE(half.rate_for_week(4) == Catch::Approx(0.1));
    REQUIRE(half.rate_for_week(3) == Catch::Approx(0.2));
    REQUIRE(half.first_week_at_final_rate() == 4);

    const auto flat = make_plan("constant", 0.1, 0.1);
    for (int w = 0; w < 5; ++w) REQUIRE(flat.rate_for_week(w) == 0.1);
    REQUIRE(flat.first_week_at_final_rate() == 0);
}

TEST_CASE("ill-formed plans are rejected", "[simulate]") {
    REQUIRE_THROWS_AS(make_plan("fast_linear_decay", 0.1, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(make_plan("fast_linear_decay", 1.0, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(make_plan("fast_linear_decay", 1.2, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(make_plan("constant", 1.0, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(make_plan("slow_decay", 1.0, 0.1), std::invalid_argument);
}

TEST_CASE("weekly budgets floor the rate with a minimum of one", "[simulate]") {
    REQUIRE(weekly_budget(0, 0.5) == 0);
    REQUIRE(weekly_budget(100, 0.1) == 10);
    REQUIRE(weekly_budget(5, 0.1) == 1);
    REQUIRE(weekly_budget(730, 0.1) == 73);
    REQUIRE(weekly_budget(3, 1.0) == 3);
    REQUIRE(weekly_budget(100, 0.095) == 9);
    REQUIRE(weekly_budget(1, 0.001) == 1);
}

TEST_CASE("bad simulation configs are rejected", "[simulate]") {
    SimulationConfig cfg = base_config(stream(1, 500, 6), 2);
    cfg.num_weeks = 0;
    REQUIRE_THROWS_AS(run_simulation(cfg), std::invalid_argument);
    cfg = base_config(stream(1, 500, 6), 2);
    cfg.test_from = cfg.train_from;
    REQUIRE_THROWS_AS(run_simulation(cfg), std::invalid_argument);
    cfg = base_config(stream(1, 500, 6), 2);
    cfg.valid_length_days = 0;
    REQUIRE_THROWS_AS(run_simulation(cfg), std::invalid_argument);
    cfg = base_config(stream(1, 500, 6), 2);
    cfg.risk_percentile = 1.5;
    REQUIRE_THROWS_AS(run_simulation(cfg), std::invalid_argument);
}

TEST_CASE("a hybrid run preserves every ledger invariant", "[simulate]") {
    SimulationConfig cfg = base_config(stream(3, 12000, 24), 20);
    const InspectionPlan plan = cfg.plan;
    const auto result = run_simulation(cfg);

    REQUIRE(result.weeks.size() == 20);
    REQUIRE(result.hidden_label_reads == 0);
    REQUIRE(result.ledger_violations == 0);
    REQUIRE(result.initial_revealed > 0);
    REQUIRE(result.weeks[0].training_size == static_cast<int>(result.initial_revealed));

    std::set<std::size_t> all_revealed;
    for (std::size_t t = 0; t < result.weeks.size(); ++t) {
        const auto& w = result.weeks[t];
        REQUIRE(w.week_index == static_cast<int>(t));
        REQUIRE(w.batch_size > 0);
        REQUIRE(w.inspection_rate == Catch::Approx(plan.rate_for_week(w.week_index)));
        REQUIRE(w.budget == weekly_budget(w.batch_size, w.inspection_rate));
        REQUIRE(w.selected_count == w.budget);

        int provenance_total = 0;
        for (const auto& [tag, count] : w.provenance_counts) provenance_total += count;
        REQUIRE(provenance_total == w.selected_count);
        const int exploit_quota = static_cast<int>(std::floor(0.9 * w.budget));
        const auto exploit_it = w.provenance_counts.find("exploit");
        REQUIRE((exploit_it == w.provenance_counts.end() ? 0 : exploit_it->second) ==
                exploit_quota);
        REQUIRE_FALSE(w.gate_branch.empty());

        if (!w.norm_precision.flagged) {
            REQUIRE(w.norm_precision.value >= 0.0);
            REQUIRE(w.norm_precision.value <= 1.0);
        }
        if (!w.norm_revenue.flagged) {
            REQUIRE(w.norm_revenue.value >= 0.0);
            REQUIRE(w.norm_revenue.value <= 1.0);
        }

        if (t + 1 < result.weeks.size())
            REQUIRE(result.weeks[t + 1].training_size == w.training_size + w.selected_count);

        REQUIRE(result.ledger[t].size() == static_cast<std::size_t>(w.selected_count));
        for (std::size_t idx : result.ledger[t]) REQUIRE(all_revealed.insert(idx).second);
    }

    const auto summary = summarize(result, plan);
    REQUIRE(summary.post_decay_from_week == 10);
    std::vector<MetricValue> post;
    for (const auto& w : result.weeks)
        if (w.week_index >= 10) post.push_back(w.norm_revenue);
    const auto expected = mean_unflagged(post);
    REQUIRE(summary.post_decay_norm_revenue.flagged == expected.flagged);
    REQUIRE(summary.post_decay_norm_revenue.value == expected.value);
}

TEST_CASE("an oracle-perfect selector achieves the normalized ceiling", "[simulate]") {
    SimulationConfig cfg = base_config(stream(5, 6000, 12), 8);
    cfg.selector_override = [](const std::vector<std::size_t>& batch,
                               const std::vector<LabeledDeclaration>& pool, int k) {
        std::vector<int> order(batch.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return pool[batch[static_cast<std::size_t>(a)]].oracle_label().revenue >
                   pool[batch[static_cast<std::size_t>(b)]].oracle_label().revenue;
        });
        order.resize(static_cast<std::size_t>(std::min<int>(k, static_cast<int>(order.size()))));
        return order;
    };
    const auto result = run_simulation(cfg);
    REQUIRE(result.hidden_label_reads == 0);
    for (const auto& w : result.weeks) {
        if (!w.norm_precision.flagged) REQUIRE(w.norm_precision.value >= 1.0 - 1e-9);
        if (!w.norm_revenue.flagged) REQUIRE(w.norm_revenue.value >= 1.0 - 1e-9);
    }
}

TEST_CASE("weeks beyond the data emit empty flagged rows", "[simulate]") {
    SimulationConfig cfg = base_config(stream(7, 3500, 7), 6);
    const auto result = run_simulation(cfg);
    REQUIRE(result.weeks.size() == 6);
    bool saw_empty = false;
    for (const auto& w : result.weeks) {
        if (w.batch_size > 0) continue;
        saw_empty = true;
        REQUIRE(w.budget == 0);
        REQUIRE(w.selected_count == 0);
        REQUIRE(w.provenance_counts.empty());
        REQUIRE(w.norm_precision.flagged);
        REQUIRE(w.norm_revenue.flagged);
    }
    REQUIRE(saw_empty);
    REQUIRE(result.weeks[2].batch_size > 0);
    REQUIRE(result.weeks[3].batch_size == 0);
}

TEST_CASE("identical configs replay identically", "[simulate]") {
    const auto data = stream(9, 8000, 16);
    SimulationConfig cfg = base_config(data, 12);
    const auto a = run_simulation(cfg);
    SimulationConfig again = base_config(data, 12);
    const auto b = run_simulation(again);

    REQUIRE(a.weeks.size() == b.weeks.size());
    REQUIRE(a.initial_revealed == b.initial_revealed);
    REQUIRE(a.ledger == b.ledger);
    for (std::size_t t = 0; t < a.weeks.size(); ++t) {
        const auto& x = a.weeks[t];
        const auto& y = b.weeks[t];
        REQUIRE(x.batch_size == y.batch_size);
        REQUIRE(x.budget == y.budget);
        REQUIRE(x.selected_count == y.selected_count);
        REQUIRE(x.training_size == y.training_size);
        REQUIRE(x.validation_size == y.validation_size);
        REQUIRE(x.provenance_counts == y.provenance_counts);
        REQUIRE(x.gate_branch == y.gate_branch);
        REQUIRE(x.raw_precision.value == y.raw_precision.value);
        REQUIRE(x.raw_revenue.value == y.raw_revenue.value);
        REQUIRE(x.norm_precision.value == y.norm_precision.value);
        REQUIRE(x.norm_revenue.value == y.norm_revenue.value);
        REQUIRE(x.illicit_found == y.illicit_found);
        REQUIRE(x.revenue_captured == y.revenue_captured);
    }
}
