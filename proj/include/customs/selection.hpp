#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "customs/model.hpp"
#include "customs/rng.hpp"

namespace customs {

// Gradient of the pseudo-label cross-entropy with respect to a two-class
// output layer, flattened as [negative-class block, positive-class block].
// The pseudo-label is the model's own hard decision at 0.5.
inline Eigen::VectorXd gradient_embedding(const Prediction& pred) {
    const double y = pred.fraud_score;
    const Eigen::VectorXd& z = pred.embedding;
    const bool pseudo_positive = y >= 0.5;
    const double p0 = 1.0 - y;
    const double p1 = y;
    Eigen::VectorXd g(2 * z.size());
    g.head(z.size()) = (p0 - (pseudo_positive ? 0.0 : 1.0)) * z;
    g.tail(z.size()) = (p1 - (pseudo_positive ? 1.0 : 0.0)) * z;
    return g;
}

// Triangular uncertainty in [0.1, 1]: peaks at fraud score 0.5, floors at the
// confident extremes.
inline double uncertainty_scale(double fraud_score) {
    return -1.8 * std::abs(fraud_score - 0.5) + 1.0;
}

// Uncertainty times log-compressed predicted seizure revenue.
inline double scale_factor(double fraud_score, double revenue_estimate) {
    return uncertainty_scale(fraud_score) * std::log1p(revenue_estimate);
}

inline Eigen::VectorXd scaled_embedding(const Prediction& pred) {
    return scale_factor(pred.fraud_score, pred.revenue_estimate) * gradient_embedding(pred);
}

// k-means++ seeding: returns k distinct point indices. `initial` pins the
// first picks (its entries count toward k); remaining picks are drawn with
// probability proportional to squared distance from the chosen set. If every
// remaining point coincides with a chosen one, picks fall back to uniform.
inline std::vector<int> kmeanspp_select(const std::vector<Eigen::VectorXd>& points, int k,
                                        Rng& rng, const std::vector<int>& initial = {}) {
    const int n = static_cast<int>(points.size());
    if (k < 0) throw std::invalid_argument("kmeanspp_select: k must be >= 0");
    if (k > n) throw std::invalid_argument("kmeanspp_select: k exceeds pool size");
    if (static_cast<int>(initial.size()) > k)
        throw std::invalid_argument("kmeanspp_select: more pinned picks than k");
    if (k == 0) return {};

    std::vector<char> chosen(static_cast<std::size_t>(n), 0);
    std::vector<int> result;
    result.reserve(static_cast<std::size_t>(k));
    std::vector<double> dist2(static_cast<std::size_t>(n),
                              std::numeric_limits<double>::infinity());

    auto add = [&](int idx) {
        if (idx < 0 || idx >= n) throw std::invalid_argument("kmeanspp_select: pick out of range");
        if (chosen[static_cast<std::size_t>(idx)])
            throw std::invalid_argument("kmeanspp_select: duplicate pinned pick");
        chosen[static_cast<std::size_t>(idx)] = 1;
        result.push_back(idx);
        for (int i = 0; i < n; ++i) {
            if (chosen[static_cast<std::size_t>(i)]) continue;
            const double d2 = (points[static_cast<std::size_t>(i)] -
                               points[static_cast<std::size_t>(idx)])
                                  .squaredNorm();
            dist2[static_cast<std::size_t>(i)] = std::min(dist2[static_cast<std::size_t>(i)], d2);
        }
    };

    for (int idx : initial) add(idx);
    if (result.empty()) add(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n))));

    while (static_cast<int>(result.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i)
            if (!chosen[static_cast<std::size_t>(i)]) total += dist2[static_cast<std::size_t>(i)];
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            int pick = -1;
            for (int i = 0; i < n; ++i) {
                if (chosen[static_cast<std::size_t>(i)]) continue;
                const double w = dist2[static_cast<std::size_t>(i)];
                if (w <= 0.0) continue;
                acc += w;
                pick = i;
                if (acc >= target) break;
            }
            add(pick);
        } else {
            std::vector<int> open;
            for (int i = 0; i < n; ++i)
                if (!chosen[static_cast<std::size_t>(i)]) open.push_back(i);
            add(open[rng.uniform_index(open.size())]);
        }
    }
    return result;
}

enum class StrategyKind { exploit, random, badge, bate, gate, hybrid };

struct StrategySpec {
    StrategyKind kind = StrategyKind::exploit;
    std::vector<StrategySpec> children;  // hybrid only
    std::vector<double> weights;         // hybrid only, sum to 1
    double gate_threshold = 0.3;         // gate only
    double gate_rate = -1.0;             // gate only; <0 means current week's rate
};

inline const char* strategy_kind_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::exploit: return "exploit";
        case StrategyKind::random: return "random";
        case StrategyKind::badge: return "badge";
        case StrategyKind::bate: return "bate";
        case StrategyKind::gate: return "gate";
        case StrategyKind::hybrid: return "hybrid";
    }
    return "?";
}

inline std::string strategy_name(const StrategySpec& spec) {
    if (spec.kind != StrategyKind::hybrid) return strategy_kind_name(spec.kind);
    std::ostringstream out;
    out << "hybrid(";
    for (std::size_t i = 0; i < spec.children.size(); ++i) {
        if (i) out << '/';
        char w[32];
        std::snprintf(w, sizeof(w), "%g", spec.weights[i]);
        out << strategy_name(spec.children[i]) << ':' << w;
    }
    out << ')';
    return out.str();
}

namespace strategy_detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline StrategyKind parse_kind(const std::string& raw) {
    const std::string name = lower(raw);
    if (name == "exploit" || name == "date") return StrategyKind::exploit;
    if (name == "random") return StrategyKind::random;
    if (name == "badge") return StrategyKind::badge;
    if (name == "bate") return StrategyKind::bate;
    if (name == "gate") return StrategyKind::gate;
    if (name == "hybrid") return StrategyKind::hybrid;
    throw std::invalid_argument("unknown sampling strategy: " + raw);
}

inline std::vector<std::string> split_slash(const std::string& s) {
    std::vector<std::string> out;
    std::string part;
    std::istringstream in(s);
    while (std::getline(in, part, '/')) out.push_back(part);
    return out;
}

}  // namespace strategy_detail

// Builds a strategy from CLI-style fields. For hybrid, subsamplings and
// weights are '/'-separated and must pair up; weights are nonnegative and sum
// to 1. "DATE" is accepted (case-insensitively) as the exploit strategy.
inline StrategySpec make_strategy(const std::string& sampling, const std::string& subsamplings = "",
                                  const std::string& weights = "") {
    namespace sd = strategy_detail;
    StrategySpec spec;
    spec.kind = sd::parse_kind(sampling);
    if (spec.kind != StrategyKind::hybrid) return spec;

    const std::vector<std::string> names = sd::split_slash(subsamplings);
    const std::vector<std::string> wparts = sd::split_slash(weights);
    if (names.empty()) throw std::invalid_argument("hybrid sampling requires subsamplings");
    if (names.size() != wparts.size())
        throw std::invalid_argument("subsamplings and weights must have the same count");
    double sum = 0.0;
    for (std::size_t i = 0; i < names.size(); ++i) {
        StrategySpec child;
        child.kind = sd::parse_kind(names[i]);
        if (child.kind == StrategyKind::hybrid)
            throw std::invalid_argument("hybrid cannot nest another hybrid");
        spec.children.push_back(child);
        std::size_t used = 0;
        double w = 0.0;
        try {
            w = std::stod(wparts[i], &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad hybrid weight: " + wparts[i]);
        }
        if (used != wparts[i].size()) throw std::invalid_argument("bad hybrid weight: " + wparts[i]);
        if (w < 0.0) throw std::invalid_argument("hybrid weights must be nonnegative");
        spec.weights.push_back(w);
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("hybrid weights must sum to 1");
    return spec;
}

struct SelectionInput {
    const std::vector<Prediction>* predictions = nullptr;
    int budget = 0;
    uint64_t select_seed = 0;
    uint64_t tiebreak_seed = 0;
    // Gate evaluation context; may be empty when no gate strategy is in play.
    const ModelSnapshot* model = nullptr;
    const std::vector<Example>* validation = nullptr;
    double week_inspection_rate = 0.0;
};

struct SelectionResult {
    std::vector<int> indices;            // positions in the candidate pool
    std::vector<std::string> provenance; // strategy that picked each index
    std::string gate_branch;             // "bate", "random", or "random_fallback"
};

// Highest fraud scores first; ties resolved by one random permutation so that
// equal-scored items have equal selection odds across seeds.
inline std::vector<int> select_exploit(const std::vector<Prediction>& preds, int k,
                                       Rng& tiebreak_rng) {
    const int n = static_cast<int>(preds.size());
    if (k < 0) throw std::invalid_argument("select_exploit: negative budget");
    k = std::min(k, n);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    tiebreak_rng.shuffle(perm);
    std::vector<int> rank(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) rank[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        const double sa = preds[static_cast<std::size_t>(a)].fraud_score;
        const double sb = preds[static_cast<std::size_t>(b)].fraud_score;
        if (sa != sb) return sa > sb;
        return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)];
    });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

inline std::vector<int> select_random(int pool_size, int k, Rng& rng) {
    if (k < 0) throw std::invalid_argument("select_random: negative budget");
    k = std::min(k, pool_size);
    const std::vector<std::size_t> picked =
        rng.sample_without_replacement(static_cast<std::size_t>(pool_size),
                                       static_cast<std::size_t>(k));
    std::vector<int> out;
    out.reserve(picked.size());
    for (std::size_t v : picked) out.push_back(static_cast<int>(v));
    return out;
}

inline std::vector<int> select_badge(const std::vector<Prediction>& preds, int k, Rng& rng) {
    k = std::min(k, static_cast<int>(preds.size()));
    std::vector<Eigen::VectorXd> emb;
    emb.reserve(preds.size());
    for (const auto& p : preds) emb.push_back(gradient_embedding(p));
    return kmeanspp_select(emb, k, rng);
}

inline std::vector<int> select_bate(const std::vector<Prediction>& preds, int k, Rng& rng) {
    k = std::min(k, static_cast<int>(preds.size()));
    std::vector<Eigen::VectorXd> emb;
    emb.reserve(preds.size());
    for (const auto& p : preds) emb.push_back(scaled_embedding(p));
    return kmeanspp_select(emb, k, rng);
}

struct GateResult {
    std::vector<int> indices;
    std::string branch;  // "bate", "random", or "random_fallback"
    double validation_score = 0.0;
};

// Trust check: diverse exploration only while the model still captures enough
// validation revenue; otherwise retreat to uniform sampling.
inline GateResult select_gate(const StrategySpec& spec, const std::vector<Prediction>& preds,
                              int k, Rng& rng, const SelectionInput& input) {
    GateResult out;
    if (!input.validation || input.validation->empty() || !input.model) {
        out.branch = "random_fallback";
        out.indices = select_random(static_cast<int>(preds.size()), k, rng);
        return out;
    }
    const double rate = spec.gate_rate > 0.0 ? spec.gate_rate : input.week_inspection_rate;
    if (rate <= 0.0 || rate > 1.0) {
        out.branch = "random_fallback";
        out.indices = select_random(static_cast<int>(preds.size()), k, rng);
        return out;
    }
    out.validation_score = validation_revenue(*input.model, *input.validation, rate);
    if (out.validation_score > spec.gate_threshold) {
        out.branch = "bate";
        out.indices = select_bate(preds, k, rng);
    } else {
        out.branch = "random";
        out.indices = select_random(static_cast<int>(preds.size()), k, rng);
    }
    return out;
}

inline SelectionResult select(const StrategySpec& spec, const SelectionInput& input);

namespace strategy_detail {

inline SelectionResult run_simple(const StrategySpec& spec, const std::vector<Prediction>& preds,
                                  int k, Rng& select_rng, Rng& tiebreak_rng,
                                  const SelectionInput& input) {
    SelectionResult out;
    switch (spec.kind) {
        case StrategyKind::exploit:
            out.indices = select_exploit(preds, k, tiebreak_rng);
            break;
        case StrategyKind::random:
            out.indices = select_random(static_cast<int>(preds.size()), k, select_rng);
            break;
        case StrategyKind::badge:
            out.indices = select_badge(preds, k, select_rng);
            break;
        case StrategyKind::bate:
            out.indices = select_bate(preds, k, select_rng);
            break;
        case StrategyKind::gate: {
            GateResult g = select_gate(spec, preds, k, select_rng, input);
            out.indices = std::move(g.indices);
            out.gate_branch = g.branch;
            break;
        }
        case StrategyKind::hybrid:
            throw std::logic_error("run_simple: hybrid is not simple");
    }
    out.provenance.assign(out.indices.size(), strategy_kind_name(spec.kind));
    return out;
}

}  // namespace strategy_detail

// Runs a selection strategy over the candidate pool. Hybrid splits the budget
// by floor(w_i * k) with the remainder going to the last child, and children
// pick sequentially from the not-yet-chosen remainder, so picks stay disjoint
// and earlier children get first claim.
inline SelectionResult select(const StrategySpec& spec, const SelectionInput& input) {
    if (!input.predictions) throw std::invalid_argument("select: missing predictions");
    const std::vector<Prediction>& preds = *input.predictions;
    const int n = static_cast<int>(preds.size());
    const int k = std::min(std::max(input.budget, 0), n);
    Rng select_rng(input.select_seed);
    Rng tiebreak_rng(input.tiebreak_seed);

    if (spec.kind != StrategyKind::hybrid)
        return strategy_detail::run_simple(spec, preds, k, select_rng, tiebreak_rng, input);

    std::vector<int> quotas(spec.children.size(), 0);
    int assigned = 0;
    for (std::size_t i = 0; i < spec.children.size(); ++i) {
        quotas[i] = static_cast<int>(std::floor(spec.weights[i] * k));
        assigned += quotas[i];
    }
    if (!quotas.empty()) quotas.back() += k - assigned;

    SelectionResult out;
    std::vector<int> remaining(static_cast<std::size_t>(n));
    std::iota(remaining.begin(), remaining.end(), 0);
    for (std::size_t c = 0; c < spec.children.size(); ++c) {
        const int quota = std::min(quotas[c], static_cast<int>(remaining.size()));
        if (quota <= 0) continue;
        std::vector<Prediction> sub;
        sub.reserve(remaining.size());
        for (int idx : remaining) sub.push_back(preds[static_cast<std::size_t>(idx)]);
        SelectionResult part = strategy_detail::run_simple(spec.children[c], sub, quota,
                                                           select_rng, tiebreak_rng, input);
        if (!part.gate_branch.empty()) out.gate_branch = part.gate_branch;
        std::vector<char> taken(remaining.size(), 0);
        for (std::size_t j = 0; j < part.indices.size(); ++j) {
            const int local = part.indices[j];
            taken[static_cast<std::size_t>(local)] = 1;
            out.indices.push_back(remaining[static_cast<std::size_t>(local)]);
            out.provenance.push_back(part.provenance[j]);
        }
        std::vector<int> next;
        next.reserve(remaining.size());
        for (std::size_t j = 0; j < remaining.size(); ++j)
            if (!taken[j]) next.push_back(remaining[j]);
        remaining = std::move(next);
    }
    return out;
}

}  // namespace customs
