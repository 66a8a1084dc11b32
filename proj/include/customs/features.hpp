#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "customs/declaration.hpp"

namespace customs {

inline constexpr int kNumericFeatures = 10;
inline constexpr int kRiskFeatures = 5;
inline constexpr int kFeatureDim = kNumericFeatures + kRiskFeatures;

enum class EntityKind : int { importer = 0, declarant = 1, tariff = 2, country = 3, office = 4 };

inline const std::string& entity_id(const Declaration& d, EntityKind kind) {
    switch (kind) {
        case EntityKind::importer: return d.importer_id;
        case EntityKind::declarant: return d.declarant_id;
        case EntityKind::tariff: return d.tariff_code;
        case EntityKind::country: return d.country;
        case EntityKind::office: return d.office_id;
    }
    throw std::invalid_argument("entity_id: bad kind");
}

// Linear-interpolation percentile of a sample, p in [0,1]: rank h = p*(n-1)
// interpolated between the two nearest order statistics.
inline double percentile_interpolated(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of empty sample");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("percentile p out of [0,1]");
    std::sort(values.begin(), values.end());
    const double h = p * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

// Historical fraud rate per entity, with a per-kind high-risk cutoff at the
// given percentile of observed entity rates. An entity is flagged when its
// rate reaches the cutoff; unseen entities are never flagged.
class RiskProfileSet {
public:
    RiskProfileSet() = default;

    // Only label-visible items contribute. Hidden labels are skipped and
    // counted against the audit, so feeding unlabeled data here is detectable.
    static RiskProfileSet fit(const std::vector<LabeledDeclaration>& history, LabelAudit& audit,
                              double percentile = 0.9) {
        RiskProfileSet out;
        out.percentile_ = percentile;
        for (const auto& item : history) {
            const InspectionLabel* y = item.training_label(audit);
            if (!y) continue;
            for (int k = 0; k < kRiskFeatures; ++k) {
                Stats& s = out.stats_[k][entity_id(item.decl, static_cast<EntityKind>(k))];
                s.total += 1;
                s.illicit += y->illicit ? 1 : 0;
            }
        }
        for (int k = 0; k < kRiskFeatures; ++k) {
            if (out.stats_[k].empty()) {
                out.cutoff_[k] = 1.0;  // nothing observed, nothing flaggable
                continue;
            }
            std::vector<double> rates;
            rates.reserve(out.stats_[k].size());
            for (const auto& [id, s] : out.stats_[k]) rates.push_back(s.rate());
            out.cutoff_[k] = percentile_interpolated(std::move(rates), percentile);
        }
        return out;
    }

    bool seen(EntityKind kind, const std::string& id) const {
        return stats_[static_cast<int>(kind)].count(id) > 0;
    }

    // Fraud rate of a seen entity; 0 for unseen ones.
    double rate(EntityKind kind, const std::string& id) const {
        const auto& m = stats_[static_cast<int>(kind)];
        const auto it = m.find(id);
        return it == m.end() ? 0.0 : it->second.rate();
    }

    double cutoff(EntityKind kind) const { return cutoff_[static_cast<int>(kind)]; }

    // 1.0 when the entity's observed rate reaches the percentile cutoff.
    double indicator(EntityKind kind, const std::string& id) const {
        const auto& m = stats_[static_cast<int>(kind)];
        const auto it = m.find(id);
        if (it == m.end()) return 0.0;
        return it->second.rate() >= cutoff_[static_cast<int>(kind)] ? 1.0 : 0.0;
    }

    double percentile() const { return percentile_; }

private:
    struct Stats {
        long long total = 0;
        long long illicit = 0;
        double rate() const { return total == 0 ? 0.0 : static_cast<double>(illicit) / total; }
    };
    std::array<std::map<std::string, Stats>, kRiskFeatures> stats_;
    std::array<double, kRiskFeatures> cutoff_{1.0, 1.0, 1.0, 1.0, 1.0};
    double percentile_ = 0.9;
};

// Raw numeric block, before log-compression and standardization:
//   0 quantity, 1 gross.weight, 2 fob.value, 3 cif.value, 4 total.taxes,
//   5 unit.value (cif/qty), 6 value.per.kg (cif/weight), 7 tax.ratio
//   (taxes/cif), 8 unit.tax (taxes/qty), 9 face.ratio (fob/cif).
// Ratios with a zero denominator are 0.
inline std::array<double, kNumericFeatures> raw_numeric_features(const Declaration& d) {
    auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
    return {d.quantity,
            d.gross_weight,
            d.fob_value,
            d.cif_value,
            d.total_taxes,
            ratio(d.cif_value, d.quantity),
            ratio(d.cif_value, d.gross_weight),
            ratio(d.total_taxes, d.cif_value),
            ratio(d.total_taxes, d.quantity),
            ratio(d.fob_value, d.cif_value)};
}

// Dims whose raw values are heavy-tailed monetary amounts; compressed with
// log1p before standardization.
inline constexpr std::array<int, 6> kLogCompressedDims = {2, 3, 4, 5, 6, 8};

inline std::array<double, kNumericFeatures> numeric_features_compressed(const Declaration& d) {
    std::array<double, kNumericFeatures> x = raw_numeric_features(d);
    for (int dim : kLogCompressedDims) x[dim] = std::log1p(x[dim]);
    return x;
}

// Per-dimension standardizer over the numeric block. Population statistics;
// zero-variance dims keep std 1 so constants map to 0.
class Scaler {
public:
    Scaler() {
        mean_.setZero(kNumericFeatures);
        std_.setOnes(kNumericFeatures);
    }

    static Scaler fit(const std::vector<LabeledDeclaration>& items) {
        Scaler s;
        if (items.empty()) return s;
        Eigen::MatrixXd raw(static_cast<Eigen::Index>(items.size()), kNumericFeatures);
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto x = numeric_features_compressed(items[i].decl);
            for (int j = 0; j < kNumericFeatures; ++j) raw(static_cast<Eigen::Index>(i), j) = x[j];
        }
        s.mean_ = raw.colwise().mean();
        const Eigen::MatrixXd centered = raw.rowwise() - s.mean_.transpose();
        Eigen::VectorXd var = centered.array().square().colwise().mean();
        for (int j = 0; j < kNumericFeatures; ++j) s.std_[j] = var[j] > 0.0 ? std::sqrt(var[j]) : 1.0;
        return s;
    }

    Eigen::VectorXd transform(const std::array<double, kNumericFeatures>& x) const {
        Eigen::VectorXd out(kNumericFeatures);
        for (int j = 0; j < kNumericFeatures; ++j) out[j] = (x[j] - mean_[j]) / std_[j];
        return out;
    }

    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::VectorXd& stddev() const { return std_; }

private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd std_;
};

// Scaler + risk profiles fit together on the same history window.
class FeatureEncoder {
public:
    FeatureEncoder() = default;

    static FeatureEncoder fit(const std::vector<LabeledDeclaration>& history, LabelAudit& audit,
                              double risk_percentile = 0.9) {
        FeatureEncoder e;
        e.scaler_ = Scaler::fit(history);
        e.profiles_ = RiskProfileSet::fit(history, audit, risk_percentile);
        return e;
    }

    Eigen::VectorXd encode(const Declaration& d) const {
        Eigen::VectorXd out(kFeatureDim);
        out.head(kNumericFeatures) = scaler_.transform(numeric_features_compressed(d));
        for (int k = 0; k < kRiskFeatures; ++k) {
            const auto kind = static_cast<EntityKind>(k);
            out[kNumericFeatures + k] = profiles_.indicator(kind, entity_id(d, kind));
        }
        return out;
    }

    Eigen::MatrixXd encode_batch(const std::vector<LabeledDeclaration>& items) const {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(items.size()), kFeatureDim);
        for (std::size_t i = 0; i < items.size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) = encode(items[i].decl).transpose();
        return out;
    }

    const Scaler& scaler() const { return scaler_; }
    const RiskProfileSet& profiles() const { return profiles_; }

private:
    Scaler scaler_;
    RiskProfileSet profiles_;
};

}  // namespace customs
