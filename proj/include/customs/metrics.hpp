#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "customs/declaration.hpp"

namespace customs {

// flagged marks an undefined week (empty selection, empty batch, or no
// revenue to capture); flagged values carry 0 and are excluded from
// aggregation by callers.
struct MetricValue {
    double value = 0.0;
    bool flagged = false;
};

inline MetricValue precision_at(const std::vector<InspectionLabel>& selected) {
    if (selected.empty()) return {0.0, true};
    long long hits = 0;
    for (const auto& y : selected) hits += y.illicit ? 1 : 0;
    return {static_cast<double>(hits) / static_cast<double>(selected.size()), false};
}

inline MetricValue revenue_at(const std::vector<InspectionLabel>& selected,
                              const std::vector<InspectionLabel>& batch) {
    double total = 0.0;
    for (const auto& y : batch) total += y.revenue;
    if (total == 0.0) return {0.0, true};
    double captured = 0.0;
    for (const auto& y : selected) captured += y.revenue;
    return {captured / total, false};
}

// Best achievable precision with k inspections: all frauds first.
inline MetricValue oracle_precision_at(const std::vector<InspectionLabel>& batch, int k) {
    if (k <= 0) return {0.0, true};
    long long illicit = 0;
    for (const auto& y : batch) illicit += y.illicit ? 1 : 0;
    const long long capped = std::min<long long>(illicit, k);
    return {static_cast<double>(capped) / static_cast<double>(k), false};
}

// Best achievable revenue share with k inspections: richest seizures first.
inline MetricValue oracle_revenue_at(const std::vector<InspectionLabel>& batch, int k) {
    if (k <= 0) return {0.0, true};
    std::vector<double> revenues;
    revenues.reserve(batch.size());
    double total = 0.0;
    for (const auto& y : batch) {
        revenues.push_back(y.revenue);
        total += y.revenue;
    }
    if (total == 0.0) return {0.0, true};
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), revenues.size());
    std::partial_sort(revenues.begin(), revenues.begin() + static_cast<long>(kk), revenues.end(),
                      std::greater<double>());
    double captured = 0.0;
    for (std::size_t i = 0; i < kk; ++i) captured += revenues[i];
    return {captured / total, false};
}

// raw / oracle. An unachievable raw (beyond the oracle) is a scoring bug, not
// a data condition, hence the logic_error.
inline MetricValue normalize(const MetricValue& raw, const MetricValue& oracle) {
    if (oracle.flagged || oracle.value == 0.0) return {0.0, true};
    if (raw.flagged) return {0.0, true};
    if (raw.value > oracle.value * (1.0 + 1e-9) + 1e-12)
        throw std::logic_error("normalize: raw metric exceeds oracle");
    return {std::min(raw.value / oracle.value, 1.0), false};
}

// Trailing mean over up to `window` entries; early entries average what is
// available so the output has the input's length.
inline std::vector<double> moving_average(const std::vector<double>& values, int window = 13) {
    if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
    std::vector<double> out(values.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t from =
            i + 1 >= static_cast<std::size_t>(window) ? i + 1 - static_cast<std::size_t>(window) : 0;
        double acc = 0.0;
        for (std::size_t j = from; j <= i; ++j) acc += values[j];
        out[i] = acc / static_cast<double>(i - from + 1);
    }
    return out;
}

// Probability a random illicit item outscores a random licit one; ties count
// half. Computed from average ranks.
inline double rank_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("rank_auc: size mismatch");
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = avg;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    double pos = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (labels[t]) {
            pos_rank_sum += rank[t];
            pos += 1.0;
        }
    }
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0.0 || neg == 0.0) throw std::invalid_argument("rank_auc: needs both classes");
    return (pos_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

// Mean of the unflagged entries; flagged result when none are usable.
inline MetricValue mean_unflagged(const std::vector<MetricValue>& values) {
    double sum = 0.0;
    long long n = 0;
    for (const auto& v : values) {
        if (v.flagged) continue;
        sum += v.value;
        ++n;
    }
    if (n == 0) return {0.0, true};
    return {sum / static_cast<double>(n), false};
}

}  // namespace customs
