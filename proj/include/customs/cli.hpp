#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "customs/ingest.hpp"
#include "customs/selection.hpp"
#include "customs/simulate.hpp"
#include "customs/synthgen.hpp"

namespace customs {

struct CliConfig {
    std::string data = "synthetic";  // "synthetic" or a CSV path
    int semi_supervised = 0;         // accepted for compatibility; must stay 0
    int batch_size = 512;
    std::string sampling = "hybrid";
    std::string subsamplings = "DATE/bATE";
    std::string weights = "0.9/0.1";
    std::string mode = "scratch";
    std::string train_from = "20130101";
    std::string test_from = "20130201";
    int test_length = 7;    // days per selection window
    int valid_length = 28;  // validation lookback, days
    double initial_inspection_rate = 100.0;  // percent
    double final_inspection_rate = 10.0;     // percent
    int epoch = 10;
    std::string closs = "bce";
    std::string rloss = "full";
    int save = 0;  // 1 writes the final model snapshot per run
    int numweeks = 100;
    std::string inspection_plan = "fast_linear_decay";
    uint64_t seed = 1;
    int repeat = 1;
    std::string output;  // output root; env CUSTOMS_SIM_OUTPUT, then "."
    // Extras beyond the compatibility surface.
    double gate_threshold = 0.3;
    double risk_percentile = 0.9;
    int hidden_dim = 16;
    double learning_rate = 5e-3;
    int headline_from = -1;  // first headline week; -1 = week after decay ends
    int num_items = 100000;
    int gen_weeks = 52;
    double illicit_rate = 0.076;

    Date train_from_date;
    Date test_from_date;
    StrategySpec strategy;
    InspectionPlan plan;
};

namespace cli_detail {

inline void apply_gate_knobs(StrategySpec& spec, double threshold) {
    spec.gate_threshold = threshold;
    for (auto& child : spec.children) apply_gate_knobs(child, threshold);
}

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string metric_field(const MetricValue& m) { return m.flagged ? "" : fmt(m.value); }

}  // namespace cli_detail

// Validates cross-field constraints and resolves derived fields. Throws
// CLI::ValidationError so failures surface as usage errors.
inline void finalize_config(CliConfig& cfg) {
    auto usage = [](const std::string& msg) { throw CLI::ValidationError(msg); };
    if (cfg.semi_supervised != 0) usage("--semi_supervised must be 0 (unsupported)");
    if (cfg.mode != "scratch") usage("--mode must be 'scratch'");
    if (cfg.closs != "bce") usage("--closs must be 'bce'");
    if (cfg.rloss != "full") usage("--rloss must be 'full'");
    if (cfg.save != 0 && cfg.save != 1) usage("--save must be 0 or 1");
    if (cfg.batch_size < 1) usage("--batch_size must be >= 1");
    if (cfg.epoch < 1) usage("--epoch must be >= 1");
    if (cfg.numweeks < 1) usage("--numweeks must be >= 1");
    if (cfg.test_length < 1) usage("--test_length must be >= 1");
    if (cfg.valid_length < 1) usage("--valid_length must be >= 1");
    if (cfg.repeat < 1) usage("--repeat must be >= 1");
    if (cfg.num_items < 1) usage("--num_items must be >= 1");
    if (cfg.gen_weeks < 1) usage("--gen_weeks must be >= 1");
    if (!(cfg.illicit_rate > 0.0 && cfg.illicit_rate < 1.0)) usage("--illicit_rate must be in (0,1)");
    if (!(cfg.risk_percentile >= 0.0 && cfg.risk_percentile <= 1.0))
        usage("--risk_percentile must be in [0,1]");
    if (cfg.hidden_dim < 1) usage("--hidden_dim must be >= 1");
    if (!(cfg.learning_rate > 0.0)) usage("--lr must be > 0");

    const auto from = Date::parse_compact(cfg.train_from);
    if (!from) usage("--train_from must be YYYYMMDD");
    const auto to = Date::parse_compact(cfg.test_from);
    if (!to) usage("--test_from must be YYYYMMDD");
    cfg.train_from_date = *from;
    cfg.test_from_date = *to;
    if (!(cfg.train_from_date < cfg.test_from_date)) usage("--train_from must precede --test_from");

    try {
        cfg.strategy = make_strategy(cfg.sampling, cfg.subsamplings, cfg.weights);
        cli_detail::apply_gate_knobs(cfg.strategy, cfg.gate_threshold);
        cfg.plan = make_plan(cfg.inspection_plan, cfg.initial_inspection_rate / 100.0,
                             cfg.final_inspection_rate / 100.0);
    } catch (const std::invalid_argument& e) {
        usage(e.what());
    }
    if (cfg.output.empty()) {
        const char* env = std::getenv("CUSTOMS_SIM_OUTPUT");
        cfg.output = env && *env ? env : ".";
    }
}

inline CLI::App* build_cli(CLI::App& app, CliConfig& cfg) {
    app.add_option("--data", cfg.data, "'synthetic' or path to a declarations CSV");
    app.add_option("--semi_supervised", cfg.semi_supervised, "compatibility flag; must be 0");
    app.add_option("--batch_size", cfg.batch_size, "training mini-batch size");
    app.add_option("--sampling", cfg.sampling, "exploit|DATE|random|badge|bATE|gATE|hybrid");
    app.add_option("--subsamplings", cfg.subsamplings, "hybrid children, '/'-separated");
    app.add_option("--weights", cfg.weights, "hybrid budget shares, '/'-separated, sum 1");
    app.add_option("--mode", cfg.mode, "training mode; only 'scratch'");
    app.add_option("--train_from", cfg.train_from, "warm-up window start, YYYYMMDD");
    app.add_option("--test_from", cfg.test_from, "first simulated week, YYYYMMDD");
    app.add_option("--test_length", cfg.test_length, "days per selection window");
    app.add_option("--valid_length", cfg.valid_length, "validation lookback in days");
    app.add_option("--initial_inspection_rate", cfg.initial_inspection_rate, "percent");
    app.add_option("--final_inspection_rate", cfg.final_inspection_rate, "percent");
    app.add_option("--epoch", cfg.epoch, "training epochs per week");
    app.add_option("--closs", cfg.closs, "classification loss; only 'bce'");
    app.add_option("--rloss", cfg.rloss, "revenue loss; only 'full'");
    app.add_option("--save", cfg.save, "1 = write final model snapshot per run");
    app.add_option("--numweeks", cfg.numweeks, "simulated weeks");
    app.add_option("--inspection_plan", cfg.inspection_plan, "fast_linear_decay|constant");
    app.add_option("--seed", cfg.seed, "master seed of the first run");
    app.add_option("--repeat", cfg.repeat, "independent runs with seeds seed..seed+N-1");
    app.add_option("--output", cfg.output, "output root (env CUSTOMS_SIM_OUTPUT, default '.')");
    app.add_option("--gate_threshold", cfg.gate_threshold, "gate validation revenue threshold");
    app.add_option("--risk_percentile", cfg.risk_percentile, "risk profile cutoff percentile");
    app.add_option("--hidden_dim", cfg.hidden_dim, "model hidden width");
    app.add_option("--lr", cfg.learning_rate, "learning rate");
    app.add_option("--headline_from", cfg.headline_from,
                   "first week of headline aggregation; -1 = after decay ends");
    app.add_option("--num_items", cfg.num_items, "synthetic data size");
    app.add_option("--gen_weeks", cfg.gen_weeks, "synthetic data span in weeks");
    app.add_option("--illicit_rate", cfg.illicit_rate, "synthetic base illicit rate");
    return &app;
}

inline nlohmann::json config_echo(const CliConfig& cfg, uint64_t run_seed) {
    return nlohmann::json{{"data", cfg.data},
                          {"semi_supervised", cfg.semi_supervised},
                          {"batch_size", cfg.batch_size},
                          {"sampling", cfg.sampling},
                          {"subsamplings", cfg.subsamplings},
                          {"weights", cfg.weights},
                          {"strategy", strategy_name(cfg.strategy)},
                          {"mode", cfg.mode},
                          {"train_from", cfg.train_from},
                          {"test_from", cfg.test_from},
                          {"test_length", cfg.test_length},
                          {"valid_length", cfg.valid_length},
                          {"initial_inspection_rate", cfg.initial_inspection_rate},
                          {"final_inspection_rate", cfg.final_inspection_rate},
                          {"epoch", cfg.epoch},
                          {"closs", cfg.closs},
                          {"rloss", cfg.rloss},
                          {"save", cfg.save},
                          {"numweeks", cfg.numweeks},
                          {"inspection_plan", cfg.inspection_plan},
                          {"gate_threshold", cfg.gate_threshold},
                          {"risk_percentile", cfg.risk_percentile},
                          {"hidden_dim", cfg.hidden_dim},
                          {"learning_rate", cfg.learning_rate},
                          {"headline_from", cfg.headline_from},
                          {"num_items", cfg.num_items},
                          {"gen_weeks", cfg.gen_weeks},
                          {"illicit_rate", cfg.illicit_rate},
                          {"run_seed", run_seed}};
}

inline void write_weekly_csv(const RunResult& result, std::ostream& out) {
    out << "week_index,start_date,end_date,batch_size,budget,provenance,gate_branch,"
           "pre_at_n,rev_at_n,norm_pre_at_n,norm_rev_at_n\n";
    for (const auto& w : result.weeks) {
        std::ostringstream prov;
        bool first = true;
        for (const auto& [tag, count] : w.provenance_counts) {
            if (!first) prov << ';';
            prov << tag << ':' << count;
            first = false;
        }
        out << w.week_index << ',' << w.start_date.to_string() << ',' << w.end_date.to_string()
            << ',' << w.batch_size << ',' << w.budget << ',' << prov.str() << ',' << w.gate_branch
            << ',' << cli_detail::metric_field(w.raw_precision) << ','
            << cli_detail::metric_field(w.raw_revenue) << ','
            << cli_detail::metric_field(w.norm_precision) << ','
            << cli_detail::metric_field(w.norm_revenue) << '\n';
    }
}

// One file per metric: raw, normalized, and a 13-week moving average of the
// normalized series. Flagged weeks leave their fields empty and do not enter
// the average.
inline void write_metric_csv(const std::vector<MetricValue>& raw,
                             const std::vector<MetricValue>& norm, std::ostream& out,
                             int window = 13) {
    out << "week_index,raw,normalized,moving_average\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
        double acc = 0.0;
        int n = 0;
        for (std::size_t j = (i + 1 >= static_cast<std::size_t>(window))
                                 ? i + 1 - static_cast<std::size_t>(window)
                                 : 0;
             j <= i; ++j) {
            if (norm[j].flagged) continue;
            acc += norm[j].value;
            ++n;
        }
        out << i << ',' << cli_detail::metric_field(raw[i]) << ','
            << cli_detail::metric_field(norm[i]);
        out << ',';
        if (n > 0) out << cli_detail::fmt(acc / n);
        out << '\n';
    }
}

struct RunOutputs {
    uint64_t seed = 0;
    RunSummary summary;
    std::filesystem::path weekly_csv;
};

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Weekly customs inspection simulator: select, inspect, learn"};
    CliConfig cfg;
    build_cli(app, cfg);
    try {
        app.parse(argc, argv);
        finalize_config(cfg);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        std::vector<LabeledDeclaration> base_data;
        const bool synthetic = cfg.data == "synthetic";
        const std::filesystem::path outdir =
            std::filesystem::path(cfg.output) / "results" / "performances";
        std::filesystem::create_directories(outdir);

        if (!synthetic) {
            std::ifstream in(cfg.data, std::ios::binary);
            if (!in) throw std::runtime_error("cannot read data file: " + cfg.data);
            ParseResult parsed = parse_declarations(in, CsvSchema{});
            if (!parsed.rejects.empty()) {
                auto rj = open_out(outdir / "rejects.csv");
                write_rejects_csv(parsed.rejects, rj);
                std::cout << parsed.rejects.size() << " rejected rows -> "
                          << (outdir / "rejects.csv").string() << "\n";
            }
            base_data = std::move(parsed.items);
        }

        std::vector<RunOutputs> runs;
        for (int r = 0; r < cfg.repeat; ++r) {
            const uint64_t run_seed = cfg.seed + static_cast<uint64_t>(r);
            SimulationConfig sim;
            if (synthetic) {
                GeneratorConfig gen;
                gen.num_items = cfg.num_items;
                gen.num_weeks = cfg.gen_weeks;
                gen.base_illicit_rate = cfg.illicit_rate;
                gen.start_date = cfg.train_from_date;
                gen.seed = run_seed;
                sim.data = generate(gen);
            } else {
                sim.data = base_data;
            }
            sim.train_from = cfg.train_from_date;
            sim.test_from = cfg.test_from_date;
            sim.num_weeks = cfg.numweeks;
            sim.test_length_days = cfg.test_length;
            sim.valid_length_days = cfg.valid_length;
            sim.plan = cfg.plan;
            sim.strategy = cfg.strategy;
            sim.train.hidden_dim = cfg.hidden_dim;
            sim.train.epochs = cfg.epoch;
            sim.train.batch_size = cfg.batch_size;
            sim.train.learning_rate = cfg.learning_rate;
            sim.risk_percentile = cfg.risk_percentile;
            sim.seed = run_seed;

            RunResult result = run_simulation(std::move(sim));
            if (result.hidden_label_reads != 0)
                throw std::logic_error("hidden label read during training path");
            if (result.ledger_violations != 0)
                throw std::logic_error("inspection ledger violation");

            RunSummary summary = summarize(result, cfg.plan);
            if (cfg.headline_from >= 0) {
                summary.post_decay_from_week = cfg.headline_from;
                std::vector<MetricValue> np, nr;
                for (const auto& w : result.weeks) {
                    if (w.week_index < cfg.headline_from) continue;
                    np.push_back(w.norm_precision);
                    nr.push_back(w.norm_revenue);
                }
                summary.post_decay_norm_precision = mean_unflagged(np);
                summary.post_decay_norm_revenue = mean_unflagged(nr);
            }

            const std::string tag = "seed" + std::to_string(run_seed);
            const std::filesystem::path weekly_path = outdir / ("weekly_" + tag + ".csv");
            {
                auto out = open_out(weekly_path);
                write_weekly_csv(result, out);
            }
            {
                std::vector<MetricValue> raw, norm;
                for (const auto& w : result.weeks) {
                    raw.push_back(w.raw_precision);
                    norm.push_back(w.norm_precision);
                }
                auto out = open_out(outdir / ("precision_" + tag + ".csv"));
                write_metric_csv(raw, norm, out);
            }
            {
                std::vector<MetricValue> raw, norm;
                for (const auto& w : result.weeks) {
                    raw.push_back(w.raw_revenue);
                    norm.push_back(w.norm_revenue);
                }
                auto out = open_out(outdir / ("revenue_" + tag + ".csv"));
                write_metric_csv(raw, norm, out);
            }
            {
                auto out = open_out(outdir / ("config_" + tag + ".json"));
                out << config_echo(cfg, run_seed).dump(2) << '\n';
            }
            if (cfg.save == 1) {
                auto out = open_out(outdir / ("model_" + tag + ".json"));
                out << nlohmann::json(result.final_model).dump(2) << '\n';
            }

            long long illicit = 0;
            double revenue = 0.0;
            for (const auto& w : result.weeks) {
                illicit += w.illicit_found;
                revenue += w.revenue_captured;
            }
            auto pct = [](const MetricValue& m) {
                if (m.flagged) return std::string("n/a");
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.4f", m.value);
                return std::string(buf);
            };
            std::cout << "run seed=" << run_seed << " strategy=" << strategy_name(cfg.strategy)
                      << "\n  whole-run     Norm-Pre " << pct(summary.norm_precision_mean)
                      << "  Norm-Rev " << pct(summary.norm_revenue_mean)
                      << "\n  from week " << summary.post_decay_from_week << "  Norm-Pre "
                      << pct(summary.post_decay_norm_precision) << "  Norm-Rev "
                      << pct(summary.post_decay_norm_revenue) << "\n  caught " << illicit
                      << " illicit, revenue ";
            {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.2f", revenue);
                std::cout << buf;
            }
            std::cout << "\n  weekly report: "
                      << weekly_path.string() << "\n";
            runs.push_back({run_seed, summary, weekly_path});
        }

        if (runs.size() > 1) {
            double np = 0.0, nr = 0.0;
            int n_np = 0, n_nr = 0;
            for (const auto& r : runs) {
                if (!r.summary.post_decay_norm_precision.flagged) {
                    np += r.summary.post_decay_norm_precision.value;
                    ++n_np;
                }
                if (!r.summary.post_decay_norm_revenue.flagged) {
                    nr += r.summary.post_decay_norm_revenue.value;
                    ++n_nr;
                }
            }
            std::cout << "mean over " << runs.size() << " runs (from week "
                      << runs.front().summary.post_decay_from_week << "): Norm-Pre "
                      << (n_np ? cli_detail::fmt(np / n_np) : "n/a") << "  Norm-Rev "
                      << (n_nr ? cli_detail::fmt(nr / n_nr) : "n/a") << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace customs
