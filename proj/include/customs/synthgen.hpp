#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "customs/dates.hpp"
#include "customs/declaration.hpp"
#include "customs/mathfn.hpp"
#include "customs/rng.hpp"

namespace customs {

enum class DriftKind { country_remap, importer_resample };

struct DriftEvent {
    int week = 0;          // first affected week
    DriftKind kind = DriftKind::importer_resample;
    double fraction = 0.0; // share of tariff codes / importers affected
};

struct GeneratorConfig {
    int num_items = 100000;
    int num_weeks = 52;
    int num_importers = 8000;
    int num_declarants = 1500;
    int num_tariff_codes = 800;
    int num_countries = 40;
    int num_offices = 20;
    double base_illicit_rate = 0.076;
    Date start_date = Date::from_ymd(2013, 1, 1);
    std::vector<DriftEvent> drift;
    uint64_t seed = 0;
};

inline void validate(const GeneratorConfig& cfg) {
    if (cfg.num_items < 1) throw std::invalid_argument("generator: num_items must be >= 1");
    if (cfg.num_weeks < 1) throw std::invalid_argument("generator: num_weeks must be >= 1");
    if (cfg.num_importers < 1) throw std::invalid_argument("generator: num_importers must be >= 1");
    if (cfg.num_declarants < 1) throw std::invalid_argument("generator: num_declarants must be >= 1");
    if (cfg.num_tariff_codes < 1) throw std::invalid_argument("generator: num_tariff_codes must be >= 1");
    if (cfg.num_countries < 1) throw std::invalid_argument("generator: num_countries must be >= 1");
    if (cfg.num_offices < 1) throw std::invalid_argument("generator: num_offices must be >= 1");
    if (!(cfg.base_illicit_rate > 0.0 && cfg.base_illicit_rate < 1.0))
        throw std::invalid_argument("generator: base_illicit_rate must be in (0,1)");
    for (const auto& d : cfg.drift) {
        if (d.week < 1 || d.week >= cfg.num_weeks)
            throw std::invalid_argument("generator: drift week out of range");
        if (!(d.fraction > 0.0 && d.fraction <= 1.0))
            throw std::invalid_argument("generator: drift fraction out of (0,1]");
    }
}

// Week-by-week item counts: as uniform as possible, remainder on the earliest
// weeks.
inline std::vector<int> emission_counts(int num_items, int num_weeks) {
    if (num_items < 1 || num_weeks < 1) throw std::invalid_argument("emission_counts: bad sizes");
    std::vector<int> counts(static_cast<std::size_t>(num_weeks), num_items / num_weeks);
    const int extra = num_items % num_weeks;
    for (int w = 0; w < extra; ++w) counts[static_cast<std::size_t>(w)] += 1;
    return counts;
}

// Day-of-week offset of the i-th item within a week holding `count` items;
// spreads items evenly over the 7 days.
inline int emission_day(int i, int count) {
    if (count < 1 || i < 0 || i >= count) throw std::invalid_argument("emission_day: bad index");
    return static_cast<int>((static_cast<long long>(i) * 7) / count);
}

namespace synth_detail {

// Beta with small integer shape: the a-th smallest of a+b-1 uniforms.
inline double beta_int(Rng& rng, int a, int b) {
    const int n = a + b - 1;
    std::vector<double> u(static_cast<std::size_t>(n));
    for (auto& v : u) v = rng.uniform();
    std::nth_element(u.begin(), u.begin() + (a - 1), u.end());
    return u[static_cast<std::size_t>(a - 1)];
}

inline double round2(double x) { return std::round(x * 100.0) / 100.0; }
inline double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

// Trade signal strengths. Dishonesty drives labels hardest (it is visible
// only through importer history), under-invoicing leaves the price trail in
// the numeric features, tariff-code risk adds a weak stable component.
inline constexpr double kUnderInvoiceCoef = 5.0;
inline constexpr double kDishonestyCoef = 4.5;
inline constexpr double kCodeRiskCoef = 1.0;
inline constexpr double kPriceSigma = 0.45;
inline constexpr double kRevenueFloor = 10.0;
inline constexpr double kVatRate = 0.16;

}  // namespace synth_detail

// Deterministic synthetic declarations with a learnable fraud signal.
// Three independent streams (latents, per-item draws, labels) keep items
// identical across configs that differ only in drift events, up to the
// drifted quantities themselves.
inline std::vector<LabeledDeclaration> generate(const GeneratorConfig& cfg) {
    validate(cfg);
    namespace sd = synth_detail;
    Rng latent_rng(derive_seed(cfg.seed, 0, SeedRole::generate));
    Rng item_rng(derive_seed(cfg.seed, 1, SeedRole::generate));
    Rng label_rng(derive_seed(cfg.seed, 2, SeedRole::generate));

    const int C = cfg.num_tariff_codes;
    const int M = cfg.num_importers;
    std::vector<double> price_mu(static_cast<std::size_t>(C));
    std::vector<double> weight_per_unit(static_cast<std::size_t>(C));
    std::vector<double> tariff_rate(static_cast<std::size_t>(C));
    std::vector<double> code_risk(static_cast<std::size_t>(C));
    std::vector<int> dominant_country(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
        price_mu[c] = std::log(100.0) + sd::kPriceSigma * latent_rng.normal();
        weight_per_unit[c] = std::exp(0.8 * latent_rng.normal());
        tariff_rate[c] = latent_rng.uniform(0.05, 0.35);
        code_risk[c] = sd::beta_int(latent_rng, 2, 5);
        dominant_country[c] = static_cast<int>(latent_rng.uniform_index(cfg.num_countries));
    }
    std::vector<double> honesty(static_cast<std::size_t>(M));
    std::vector<int> home_declarant(static_cast<std::size_t>(M));
    std::vector<int> home_office(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
        honesty[m] = sd::beta_int(latent_rng, 5, 2);
        home_declarant[m] = static_cast<int>(latent_rng.uniform_index(cfg.num_declarants));
        home_office[m] = static_cast<int>(latent_rng.uniform_index(cfg.num_offices));
    }

    // Drift deltas, drawn up front so the per-item stream stays untouched.
    std::vector<DriftEvent> events = cfg.drift;
    std::stable_sort(events.begin(), events.end(),
                     [](const DriftEvent& a, const DriftEvent& b) { return a.week < b.week; });
    struct HonestyPatch { int importer; double value; };
    struct CountryPatch { int code; int country; };
    std::map<int, std::vector<HonestyPatch>> honesty_patches;
    std::map<int, std::vector<CountryPatch>> country_patches;
    for (const auto& ev : events) {
        if (ev.kind == DriftKind::importer_resample) {
            const int count = std::max(1, static_cast<int>(std::floor(ev.fraction * M)));
            const auto who = latent_rng.sample_without_replacement(static_cast<std::size_t>(M),
                                                                   static_cast<std::size_t>(count));
            for (std::size_t w : who)
                honesty_patches[ev.week].push_back(
                    {static_cast<int>(w), sd::beta_int(latent_rng, 5, 2)});
        } else {
            const int count = std::max(1, static_cast<int>(std::floor(ev.fraction * C)));
            const auto which = latent_rng.sample_without_replacement(static_cast<std::size_t>(C),
                                                                     static_cast<std::size_t>(count));
            for (std::size_t c : which)
                country_patches[ev.week].push_back(
                    {static_cast<int>(c),
                     static_cast<int>(latent_rng.uniform_index(cfg.num_countries))});
        }
    }

    auto entity_name = [](const char* prefix, int idx) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%05d", prefix, idx);
        return std::string(buf);
    };

    struct Pending {
        Declaration decl;
        double score = 0.0;
        double base_score = 0.0;  // score with drift patches ignored
        double potential_revenue = 0.0;
    };
    std::vector<Pending> pending;
    pending.reserve(static_cast<std::size_t>(cfg.num_items));

    const std::vector<int> counts = emission_counts(cfg.num_items, cfg.num_weeks);
    std::vector<double> eff_honesty = honesty;
    std::vector<int> eff_country = dominant_country;
    long long seq = 0;
    for (int w = 0; w < cfg.num_weeks; ++w) {
        if (auto it = honesty_patches.find(w); it != honesty_patches.end())
            for (const auto& p : it->second) eff_honesty[static_cast<std::size_t>(p.importer)] = p.value;
        if (auto it = country_patches.find(w); it != country_patches.end())
            for (const auto& p : it->second) eff_country[static_cast<std::size_t>(p.code)] = p.country;

        const int n_w = counts[static_cast<std::size_t>(w)];
        for (int i = 0; i < n_w; ++i) {
            Pending item;
            Declaration& d = item.decl;
            ++seq;
            char idbuf[24];
            std::snprintf(idbuf, sizeof(idbuf), "SGD%07lld", seq);
            d.sgd_id = idbuf;
            d.sgd_date = cfg.start_date + w * 7 + emission_day(i, n_w);

            const int m = static_cast<int>(item_rng.uniform_index(M));
            const int c = static_cast<int>(item_rng.uniform_index(C));
            d.importer_id = entity_name("IMP", m);
            d.tariff_code = std::to_string(100000 + c);
            d.declarant_id = entity_name(
                "DEC", item_rng.bernoulli(0.8)
                           ? home_declarant[m]
                           : static_cast<int>(item_rng.uniform_index(cfg.num_declarants)));
            d.office_id = entity_name(
                "OFF", item_rng.bernoulli(0.7)
                           ? home_office[m]
                           : static_cast<int>(item_rng.uniform_index(cfg.num_offices)));
            const int country = item_rng.bernoulli(0.75)
                                    ? eff_country[static_cast<std::size_t>(c)]
                                    : static_cast<int>(item_rng.uniform_index(cfg.num_countries));
            d.country = entity_name("C", country);

            const double qty = 1.0 + std::floor(std::exp(1.2 + 1.2 * item_rng.normal()));
            d.quantity = std::min(qty, 1e6);
            d.gross_weight = sd::round3(std::max(
                0.001, d.quantity * weight_per_unit[c] * item_rng.uniform(0.9, 1.1)));

            const double unit_price = std::exp(price_mu[c] + 0.25 * item_rng.normal());
            const double fair_value = d.quantity * unit_price;
            const double h = eff_honesty[static_cast<std::size_t>(m)];
            const double h_base = honesty[static_cast<std::size_t>(m)];
            const double depth = item_rng.uniform(0.35, 0.95);
            const double under_invoice = (1.0 - h) * depth;
            d.cif_value = sd::round2(std::max(0.01, fair_value * (1.0 - under_invoice)));
            d.fob_value = std::min(sd::round2(d.cif_value * item_rng.uniform(0.80, 0.98)),
                                   d.cif_value);
            const double tax_rate = tariff_rate[c] + sd::kVatRate;
            d.total_taxes = sd::round2(tax_rate * d.cif_value);

            item.score = sd::kUnderInvoiceCoef * under_invoice +
                         sd::kDishonestyCoef * (1.0 - h) + sd::kCodeRiskCoef * code_risk[c];
            item.base_score = sd::kUnderInvoiceCoef * (1.0 - h_base) * depth +
                              sd::kDishonestyCoef * (1.0 - h_base) +
                              sd::kCodeRiskCoef * code_risk[c];
            item.potential_revenue = sd::round2(
                std::max(sd::kRevenueFloor, tax_rate * (fair_value - d.cif_value)));
            pending.push_back(std::move(item));
        }
    }

    // Intercept calibration: mean fraud probability equals the target rate.
    // Calibrated on drift-free scores so the intercept, and with it every
    // pre-drift label, is identical across configs that differ only in drift.
    double lo = -40.0, hi = 40.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        double mean = 0.0;
        for (const auto& p : pending) mean += sigmoid(p.base_score + mid);
        mean /= static_cast<double>(pending.size());
        if (mean < cfg.base_illicit_rate) lo = mid;
        else hi = mid;
    }
    const double intercept = 0.5 * (lo + hi);

    std::vector<LabeledDeclaration> out;
    out.reserve(pending.size());
    for (const auto& p : pending) {
        InspectionLabel y;
        y.illicit = label_rng.bernoulli(sigmoid(p.score + intercept));
        y.revenue = y.illicit ? p.potential_revenue : 0.0;
        out.emplace_back(p.decl, y);
    }
    return out;
}

}  // namespace customs
