#pragma once

// Head-to-head comparison on simulated paths. Each path covers twice the
// evaluation horizon: the first half trains the band models, the second half
// is traded by every strategy in the roster, starting from unit wealth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cointel/backtest.hpp"
#include "cointel/bandml.hpp"
#include "cointel/dgm.hpp"
#include "cointel/error.hpp"
#include "cointel/net.hpp"
#include "cointel/sim.hpp"

namespace cointel {

inline const std::vector<std::string>& all_strategy_labels() {
    static const std::vector<std::string> labels{"MVC", "SC", "DS", "ML_LS", "ML"};
    return labels;
}

/// Name used for a strategy in rankings and comparisons (dynamic switching
/// appears as FM there).
inline std::string display_label(const std::string& label) { return label == "DS" ? "FM" : label; }

inline TrainConfig adam_config() {
    TrainConfig c;
    c.optimizer = Optimizer::Adam;
    return c;
}

struct DGMSettings {
    int width = 50;
    int layers = 3;
    std::uint64_t init_seed = 7;
    TrainConfig train = adam_config();
    ResidualForm residual_form = ResidualForm::Normalized;
    int domain_paths = 200;
    /// When set, the network is loaded instead of trained.
    std::string checkpoint_in;
};

struct ExperimentConfig {
    CointelationParams params;
    int horizon_days = 1000;
    int n_paths = 500;
    std::uint64_t seed = 20240101;
    std::vector<std::string> roster = all_strategy_labels();
    DGMSettings dgm;
    int bands = kDefaultBandCount;
    double weight_step = kDefaultWeightStep;
    double tau = kDefaultRiskTolerance;
    double gamma = 0.5;
    int substeps = 8;
    SwitchingMode switching = SwitchingMode::TwoShadow;
    std::string output_dir = "out";
    int histogram_bins = 41;
    /// Path whose weight and spread series are exported.
    int illustrative_path = 0;

    void validate() const {
        params.validate();
        detail::require(n_paths >= 1, "n_paths must be >= 1");
        detail::require(horizon_days >= 2, "horizon_days must be >= 2");
        detail::require(bands >= 1, "band count must be >= 1");
        detail::require(weight_step > 0.0 && weight_step <= 1.0, "weight step must lie in (0, 1]");
        detail::require(std::isfinite(tau) && tau >= 0.0, "tau must be >= 0");
        detail::require(std::isfinite(gamma) && gamma < 1.0 && gamma != 0.0, "gamma must be < 1 and nonzero");
        detail::require(substeps >= 1, "substeps must be >= 1");
        detail::require(histogram_bins >= 1, "histogram needs at least one bin");
        detail::require(dgm.width >= 1 && dgm.layers >= 1, "network width and depth must be >= 1");
        detail::require(illustrative_path >= 0 && illustrative_path < n_paths, "illustrative path out of range");
        dgm.train.validate();
        for (const auto& r : roster) {
            const auto& all = all_strategy_labels();
            detail::require(std::find(all.begin(), all.end(), r) != all.end(),
                            "unknown strategy '" + r + "' (expected MVC, SC, DS, ML_LS or ML)");
        }
    }
    bool has(const std::string& label) const { return std::find(roster.begin(), roster.end(), label) != roster.end(); }
    bool needs_sc() const { return has("SC") || has("DS"); }
    bool needs_mvc() const { return has("MVC") || has("DS"); }
    double horizon_years() const { return horizon_days * kDailyDt; }
};

/// The trained value network and the domain it was trained on.
struct SCModel {
    std::shared_ptr<const DGMNetwork> net;
    double T = 0.0;
    ZDomain domain;
    std::optional<TrainReport> report;
};

inline ZDomain domain_from_map(const InputMap& m) {
    ZDomain d;
    d.z_lo = m.z_offset - 1.0 / m.z_scale;
    d.z_hi = m.z_offset + 1.0 / m.z_scale;
    d.q_lo = d.z_lo;
    d.q_hi = d.z_hi;
    return d;
}

/// Output bias starts at the mean terminal value so training begins near the
/// terminal condition rather than at f = 0.
inline void anchor_output_bias(DGMNetwork& net, const PDEProblem& problem, int samples = 101) {
    double s = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double z = problem.z_lo + (problem.z_hi - problem.z_lo) * i / std::max(1, samples - 1);
        s += problem.terminal_value(z);
    }
    net.theta[net.layout().b_out()] = s / samples;
}

/// Trains (or loads) the SC network for the evaluation horizon. The z-domain
/// is taken from paths spanning the whole doubled horizon, so it covers the
/// ratios met at the start of evaluation.
inline SCModel prepare_sc_model(const ExperimentConfig& cfg, const TrainObserver& observer = {}) {
    SCModel m;
    m.T = cfg.horizon_years();
    if (!cfg.dgm.checkpoint_in.empty()) {
        auto net = std::make_shared<DGMNetwork>(load_checkpoint(cfg.dgm.checkpoint_in));
        m.domain = domain_from_map(net->input_map);
        const double t_span = 2.0 / net->input_map.t_scale;
        if (std::abs(t_span - m.T) > 1e-9 * m.T) {
            throw InvalidInput("checkpoint horizon does not match horizon_days");
        }
        m.net = net;
        return m;
    }
    m.domain = simulated_z_domain(cfg.params, 2.0 * m.T, cfg.dgm.domain_paths, stream_seed(cfg.seed, 0xD0A1));
    const PDEProblem prob = cointelation_pde_problem(cfg.params, cfg.gamma, m.T, m.domain, cfg.dgm.residual_form);
    DGMNetwork net = init_network(cfg.dgm.width, cfg.dgm.layers, cfg.dgm.init_seed, prob.normalization);
    anchor_output_bias(net, prob);
    m.report = train(net, prob, cfg.dgm.train, observer);
    if (m.report->diverged) throw NumericalFault("DGM training diverged (loss > 1e6 for 100 consecutive steps)");
    m.net = std::make_shared<DGMNetwork>(std::move(net));
    return m;
}

struct PathResult {
    std::map<std::string, double> returns;
    std::map<std::string, StrategyTrace> traces;  // kept for the illustrative path only
    PathPair eval_path;
};

/// Runs every roster strategy on one doubled-horizon path.
inline PathResult run_path(const ExperimentConfig& cfg, const SCModel* sc, int index, bool keep_traces) {
    const double dt = kDailyDt;
    const auto n = static_cast<std::size_t>(cfg.horizon_days);
    const std::uint64_t path_seed = stream_seed(cfg.seed, static_cast<std::uint64_t>(index) + 1);
    const PathPair full = simulate_pair(cfg.params, 2.0 * cfg.horizon_years(), dt, cfg.substeps, path_seed);
    const PathPair train_part = full.slice(0, n);
    const PathPair eval = full.slice(n, 2 * n);

    PathResult r;
    std::map<std::string, StrategyTrace> traces;
    if (cfg.needs_mvc()) {
        traces["MVC"] = run_strategy(eval, mvc_strategy(cfg.params, cfg.tau, dt, stream_seed(path_seed, 0x3C)));
    }
    if (cfg.needs_sc()) {
        traces["SC"] = run_strategy(
            eval, sc_strategy(sc->net, cfg.params, cfg.gamma, sc->T, sc->domain.z_lo, sc->domain.z_hi));
    }
    if (cfg.has("DS")) traces["DS"] = dynamic_switching_trace(eval, traces["SC"], traces["MVC"], cfg.switching);
    if (cfg.has("ML_LS")) {
        auto model = std::make_shared<const BandModel>(train_bandml(train_part, cfg.bands, cfg.weight_step, true));
        traces["ML_LS"] = run_strategy(eval, live_strategy(model, "ML_LS"));
    }
    if (cfg.has("ML")) {
        auto model = std::make_shared<const BandModel>(train_bandml(train_part, cfg.bands, cfg.weight_step, false));
        traces["ML"] = run_strategy(eval, live_strategy(model, "ML"));
    }
    for (const auto& label : cfg.roster) r.returns[label] = portfolio_return(traces.at(label));
    if (keep_traces) {
        r.traces = std::move(traces);
        r.eval_path = eval;
    }
    return r;
}

struct StrategyStats {
    std::string label;
    double mean = 0.0;
    double std_error = 0.0;
};

struct WinRate {
    std::string a, b;
    double rate = 0.0;  // fraction of paths with return_a > return_b
};

struct Histogram {
    std::string name;
    std::vector<double> edges;  // bins + 1 edges
    std::vector<long> counts;
};

struct ExperimentSummary {
    std::uint64_t seed = 0;
    int n_paths = 0;
    std::vector<std::string> roster;
    std::vector<StrategyStats> stats;
    /// returns[label][path]
    std::map<std::string, std::vector<double>> returns;
    std::vector<WinRate> win_rates;
    std::vector<Histogram> histograms;
    std::string ranking;
    std::map<std::string, RuleCounters> counters;
    std::map<std::string, StrategyTrace> illustrative;
    PathPair illustrative_path;
    std::optional<TrainReport> dgm_report;
    std::shared_ptr<const DGMNetwork> dgm_net;

    const StrategyStats& stat(const std::string& label) const {
        for (const auto& s : stats)
            if (s.label == label) return s;
        throw InvalidInput("strategy not in summary: " + label);
    }
    double win_rate(const std::string& a, const std::string& b) const {
        for (const auto& w : win_rates)
            if (w.a == a && w.b == b) return w.rate;
        throw InvalidInput("no win rate for " + a + " vs " + b);
    }
};

inline Histogram make_histogram(std::string name, const std::vector<double>& values, int bins) {
    Histogram h;
    h.name = std::move(name);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    if (values.empty()) {
        h.edges.assign(static_cast<std::size_t>(bins) + 1, 0.0);
        return h;
    }
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / bins;
    for (int i = 0; i <= bins; ++i) h.edges.push_back(lo + width * i);
    h.edges.back() = hi;
    for (double v : values) {
        auto b = static_cast<long>(std::floor((v - lo) / width));
        b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

/// Comparisons reported as win rates and excess-return histograms.
inline const std::vector<std::pair<std::string, std::string>>& comparison_pairs() {
    static const std::vector<std::pair<std::string, std::string>> pairs{
        {"ML_LS", "SC"}, {"ML", "DS"}, {"DS", "SC"}, {"DS", "MVC"}, {"SC", "MVC"}, {"ML", "MVC"}};
    return pairs;
}

inline ExperimentSummary summarize(const ExperimentConfig& cfg, std::map<std::string, std::vector<double>> returns) {
    ExperimentSummary s;
    s.seed = cfg.seed;
    s.n_paths = cfg.n_paths;
    s.roster = cfg.roster;
    s.returns = std::move(returns);
    for (const auto& label : cfg.roster) {
        const auto& v = s.returns.at(label);
        const double n = static_cast<double>(v.size());
        double sum = 0.0;
        for (double x : v) sum += x;
        const double mean = sum / n;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
        s.stats.push_back({label, mean, se});
    }
    for (const auto& [a, b] : comparison_pairs()) {
        if (!cfg.has(a) || !cfg.has(b)) continue;
        const auto& ra = s.returns.at(a);
        const auto& rb = s.returns.at(b);
        std::vector<double> excess(ra.size());
        long wins = 0;
        for (std::size_t i = 0; i < ra.size(); ++i) {
            excess[i] = ra[i] - rb[i];
            if (ra[i] > rb[i]) ++wins;
        }
        s.win_rates.push_back({a, b, static_cast<double>(wins) / static_cast<double>(ra.size())});
        s.histograms.push_back(
            make_histogram("excess_" + display_label(a) + "_vs_" + display_label(b), excess, cfg.histogram_bins));
    }
    std::vector<StrategyStats> order = s.stats;
    std::stable_sort(order.begin(), order.end(),
                     [](const StrategyStats& x, const StrategyStats& y) { return x.mean < y.mean; });
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i) s.ranking += " < ";
        s.ranking += display_label(order[i].label);
    }
    return s;
}

using PathObserver = std::function<void(int index)>;

inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, const TrainObserver& train_observer = {},
                                        const PathObserver& path_observer = {}) {
    cfg.validate();
    std::optional<SCModel> sc;
    if (cfg.needs_sc()) sc = prepare_sc_model(cfg, train_observer);

    std::map<std::string, std::vector<double>> returns;
    for (const auto& label : cfg.roster) returns[label].reserve(static_cast<std::size_t>(cfg.n_paths));
    PathResult illustrative;
    std::map<std::string, RuleCounters> counters;
    for (int i = 0; i < cfg.n_paths; ++i) {
        PathResult r = run_path(cfg, sc ? &*sc : nullptr, i, true);
        for (const auto& [label, ret] : r.returns) returns[label].push_back(ret);
        for (const auto& [label, tr] : r.traces) {
            auto& c = counters[label];
            c.fallback_events += tr.counters.fallback_events;
            c.eval_errors += tr.counters.eval_errors;
            c.clamp_events += tr.counters.clamp_events;
            c.domain_clamps += tr.counters.domain_clamps;
            c.switches += tr.counters.switches;
        }
        if (i == cfg.illustrative_path) illustrative = std::move(r);
        if (path_observer) path_observer(i);
    }
    ExperimentSummary s = summarize(cfg, std::move(returns));
    s.counters = std::move(counters);
    s.illustrative = std::move(illustrative.traces);
    s.illustrative_path = std::move(illustrative.eval_path);
    if (sc) {
        s.dgm_report = sc->report;
        s.dgm_net = sc->net;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Output files. Every file starts with "# columns: ... seed: <root seed>".

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) throw IoError("cannot open output file: " + p.string());
    os << std::setprecision(17);
    return os;
}

inline void close_output(std::ofstream& os, const std::filesystem::path& p) {
    os.flush();
    if (!os) throw IoError("failed writing output file: " + p.string());
}

} // namespace detail

inline void write_summary_table(std::ostream& os, const ExperimentSummary& s) {
    os << "# columns: criterion,average_return,std_error,n_paths seed: " << s.seed << '\n';
    for (const auto& st : s.stats) os << st.label << ',' << st.mean << ',' << st.std_error << ',' << s.n_paths << '\n';
}

inline std::vector<std::filesystem::path> emit_outputs(const ExperimentSummary& s, const std::string& outdir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(outdir, ec);
    if (ec) throw IoError("cannot create output directory " + outdir + ": " + ec.message());
    std::vector<fs::path> written;
    auto file = [&](const std::string& name, const std::function<void(std::ostream&)>& body) {
        const fs::path p = fs::path(outdir) / name;
        auto os = detail::open_output(p);
        body(os);
        detail::close_output(os, p);
        written.push_back(p);
    };

    file("summary.csv", [&](std::ostream& os) { write_summary_table(os, s); });

    file("returns.csv", [&](std::ostream& os) {
        os << "# columns: path";
        for (const auto& l : s.roster) os << ',' << l;
        os << " seed: " << s.seed << '\n';
        for (int i = 0; i < s.n_paths && !s.roster.empty(); ++i) {
            os << i;
            for (const auto& l : s.roster) os << ',' << s.returns.at(l)[static_cast<std::size_t>(i)];
            os << '\n';
        }
    });

    file("win_rates.csv", [&](std::ostream& os) {
        os << "# columns: strategy,versus,win_rate seed: " << s.seed << '\n';
        for (const auto& w : s.win_rates) os << display_label(w.a) << ',' << display_label(w.b) << ',' << w.rate << '\n';
    });

    file("ranking.csv", [&](std::ostream& os) {
        os << "# columns: ranking seed: " << s.seed << '\n';
        if (!s.ranking.empty()) os << s.ranking << '\n';
    });

    for (const auto& h : s.histograms) {
        file(h.name + "_histogram.csv", [&](std::ostream& os) {
            os << "# columns: bin,lo,hi,count seed: " << s.seed << '\n';
            for (std::size_t b = 0; b < h.counts.size(); ++b) {
                os << b << ',' << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
            }
        });
    }

    if (!s.illustrative.empty()) {
        file("illustrative_path.csv", [&](std::ostream& os) {
            const PathPair& p = s.illustrative_path;
            os << "# columns: step,time,x,y,spread";
            for (const auto& [label, tr] : s.illustrative) os << ",w1_" << label << ",w2_" << label << ",V_" << label;
            os << " seed: " << s.seed << '\n';
            for (std::size_t k = 0; k < p.x.size(); ++k) {
                os << k << ',' << p.times[k] << ',' << p.x[k] << ',' << p.y[k] << ',' << p.x[k] - p.y[k];
                for (const auto& [label, tr] : s.illustrative) {
                    if (k < tr.w1.size()) os << ',' << tr.w1[k] << ',' << tr.w2[k];
                    else os << ",,";
                    os << ',' << tr.wealth[k];
                }
                os << '\n';
            }
        });
    }

    file("counters.csv", [&](std::ostream& os) {
        os << "# columns: strategy,fallback_events,eval_errors,clamp_events,domain_clamps,switches seed: " << s.seed
           << '\n';
        for (const auto& [label, c] : s.counters) {
            os << label << ',' << c.fallback_events << ',' << c.eval_errors << ',' << c.clamp_events << ','
               << c.domain_clamps << ',' << c.switches << '\n';
        }
    });
    return written;
}

} // namespace cointel
