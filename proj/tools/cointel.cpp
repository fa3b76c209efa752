// Command-line front end. Every subcommand accepts --config <file.json>; the
// JSON object supplies option values by name (dashes or underscores), and
// options given on the command line override it.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cointel/cointel.hpp"

namespace {

using json = nlohmann::json;
using namespace cointel;

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

std::string canonical_key(std::string k) {
    for (char& c : k)
        if (c == '-') c = '_';
    return k;
}

/// Option registry for one subcommand: values start at their defaults, are
/// replaced by the config file, then by explicit flags.
class Settings {
public:
    explicit Settings(CLI::App* app) : app_(app) {
        app_->add_option("--config", config_path_, "JSON file supplying option values");
    }

    template <class T>
    void add(const std::string& name, T& target, const std::string& help) {
        CLI::Option* opt = app_->add_option("--" + name, target, help)->capture_default_str();
        const std::string key = canonical_key(name);
        entries_[key] = Entry{opt, [&target, key](const json& v) {
                                  try {
                                      target = v.get<T>();
                                  } catch (const json::exception&) {
                                      throw InvalidInput("config field '" + key + "' has the wrong type");
                                  }
                              }};
    }

    void add_flag(const std::string& name, bool& target, const std::string& help) {
        CLI::Option* opt = app_->add_flag("--" + name, target, help);
        const std::string key = canonical_key(name);
        entries_[key] = Entry{opt, [&target, key](const json& v) {
                                  if (!v.is_boolean()) throw InvalidInput("config field '" + key + "' must be boolean");
                                  target = v.get<bool>();
                              }};
    }

    /// Apply config-file values for every option not given on the command line.
    void resolve() {
        if (config_path_.empty()) return;
        std::ifstream is(config_path_);
        if (!is) throw IoError("cannot open config file: " + config_path_);
        json doc;
        try {
            is >> doc;
        } catch (const json::parse_error& e) {
            throw InvalidInput("config file is not valid JSON: " + std::string(e.what()));
        }
        if (!doc.is_object()) throw InvalidInput("config file must hold a JSON object");
        for (const auto& [k, v] : doc.items()) {
            const auto it = entries_.find(canonical_key(k));
            if (it == entries_.end()) throw InvalidInput("unknown config field '" + k + "'");
            if (it->second.option->count() > 0) continue;
            it->second.apply(v);
        }
    }

private:
    struct Entry {
        CLI::Option* option = nullptr;
        std::function<void(const json&)> apply;
    };
    CLI::App* app_;
    std::string config_path_;
    std::map<std::string, Entry> entries_;
};

// Flag values are stored in these and copied into library structs after parsing.

struct ModelFlags {
    CointelationParams p;
    void add(Settings& s) {
        s.add("mu", p.mu, "drift of the leading asset (per year)");
        s.add("sigma", p.sigma, "volatility of the leading asset");
        s.add("kappa", p.kappa, "mean-reversion speed (per year)");
        s.add("eta", p.eta, "volatility of the lagging asset");
        s.add("rho", p.rho, "Brownian correlation");
        s.add("x0", p.x0, "initial leading price");
        s.add("y0", p.y0, "initial lagging price");
    }
};

struct TrainFlags {
    TrainConfig c;
    std::string optimizer = "adam";
    int width = 50;
    int layers = 3;
    std::uint64_t init_seed = 7;
    void add(Settings& s) {
        s.add("alpha0", c.alpha0, "initial learning rate");
        s.add("lambda-decay", c.lambda_decay, "per-step learning-rate decay");
        s.add("batch-interior", c.batch_interior, "interior points per step");
        s.add("batch-terminal", c.batch_terminal, "terminal points per step");
        s.add("batch-boundary", c.batch_boundary, "boundary points per step");
        s.add("max-steps", c.max_steps, "maximum training steps");
        s.add("tolerance", c.tolerance, "stop when the loss falls to this value");
        s.add("train-seed", c.seed, "seed of the point sampler");
        s.add("clip", c.clip_threshold, "gradient-norm clipping threshold");
        s.add("log-every", c.log_every, "loss logging interval (steps)");
        s.add("optimizer", optimizer, "sgd (plain descent) or adam");
        s.add("width", width, "hidden width of the DGM network");
        s.add("layers", layers, "number of DGM layers");
        s.add("init-seed", init_seed, "seed of the weight initialization");
    }
    TrainConfig config() const {
        TrainConfig out = c;
        out.optimizer = parse_optimizer(optimizer);
        return out;
    }
};

std::ofstream open_file(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
        if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
    }
    std::ofstream os(path);
    if (!os) throw IoError("cannot open output file: " + path);
    os << std::setprecision(17);
    return os;
}

void finish_file(std::ofstream& os, const std::string& path) {
    os.flush();
    if (!os) throw IoError("failed writing output file: " + path);
}

std::vector<std::string> split_roster(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// x,y series of one path from a `simulate` output file.
PathPair read_path_csv(const std::string& file, int path_index) {
    std::ifstream is(file);
    if (!is) throw IoError("cannot open input file: " + file);
    PathPair p;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) {
            try {
                v.push_back(std::stod(cell));
            } catch (const std::logic_error&) {
                throw InvalidInput("non-numeric field in " + file + ": " + line);
            }
        }
        if (v.size() != 5) throw InvalidInput("expected path,step,time,x,y rows in " + file);
        if (static_cast<int>(v[0]) != path_index) continue;
        p.times.push_back(v[2]);
        p.x.push_back(v[3]);
        p.y.push_back(v[4]);
    }
    if (p.x.empty()) throw InvalidInput("path " + std::to_string(path_index) + " not found in " + file);
    return p;
}

// ---------------------------------------------------------------------------

struct SimulateCmd {
    ModelFlags model;
    GeneralizedSDEParams gen;
    std::string kind = "cointelation";
    int horizon_days = 1000;
    double dt = kDailyDt;
    int substeps = 8;
    int paths = 1;
    std::uint64_t seed = 1;
    std::string out = "paths.csv";

    void add(Settings& s) {
        model.add(s);
        s.add("model", kind, "cointelation or generalized");
        s.add("theta", gen.theta, "generalized SDE: reversion speed");
        s.add("mu-level", gen.mu_level, "generalized SDE: long-term mean");
        s.add("gen-sigma", gen.sigma, "generalized SDE: diffusion scale");
        s.add("alpha", gen.alpha, "generalized SDE: level exponent");
        s.add("beta", gen.beta, "generalized SDE: boundary exponent");
        s.add("p0", gen.p0, "generalized SDE: initial value");
        s.add("horizon-days", horizon_days, "number of recorded steps");
        s.add("dt", dt, "recorded step (years)");
        s.add("substeps", substeps, "Euler substeps per recorded step");
        s.add("paths", paths, "number of paths");
        s.add("seed", seed, "root seed");
        s.add("out", out, "output file");
    }

    void run() const {
        detail::require(paths >= 1, "paths must be >= 1");
        detail::require(horizon_days >= 1, "horizon_days must be >= 1");
        auto os = open_file(out);
        if (kind == "cointelation") {
            os << "# columns: path,step,time,x,y seed: " << seed << '\n';
            for (int i = 0; i < paths; ++i) {
                const PathPair p = simulate_pair(model.p, horizon_days * dt, dt, substeps,
                                                 stream_seed(seed, static_cast<std::uint64_t>(i)));
                for (std::size_t k = 0; k < p.size(); ++k) {
                    os << i << ',' << k << ',' << p.times[k] << ',' << p.x[k] << ',' << p.y[k] << '\n';
                }
            }
        } else if (kind == "generalized") {
            os << "# columns: path,step,time,p seed: " << seed << '\n';
            for (int i = 0; i < paths; ++i) {
                const GeneralizedPath p =
                    simulate_generalized(gen, horizon_days * dt, dt, stream_seed(seed, static_cast<std::uint64_t>(i)));
                for (std::size_t k = 0; k < p.values.size(); ++k) {
                    os << i << ',' << k << ',' << p.times[k] << ',' << p.values[k] << '\n';
                }
                if (p.clamp_events > 0) {
                    std::cerr << "warning: path " << i << ": " << p.clamp_events << " clamped diffusion evaluations\n";
                }
            }
        } else {
            throw InvalidInput("model must be cointelation or generalized");
        }
        finish_file(os, out);
    }
};

struct DiagnoseCmd {
    ModelFlags model;
    CointelationHypothesis hyp{kUnset, kUnset};
    std::string input;
    int path_index = 0;
    int horizon_days = 1000;
    int substeps = 8;
    std::uint64_t seed = 1;
    std::string out = "diagnose.csv";

    void add(Settings& s) {
        model.add(s);
        s.add("input", input, "simulate output to test (default: simulate from the model flags)");
        s.add("path-index", path_index, "path to read from --input");
        s.add("horizon-days", horizon_days, "steps to simulate when no input is given");
        s.add("substeps", substeps, "Euler substeps per step");
        s.add("seed", seed, "root seed");
        s.add("hyp-rho", hyp.rho, "hypothesized Brownian correlation (default: --rho)");
        s.add("hyp-kappa", hyp.kappa, "hypothesized mean reversion per observation step (default: --kappa * dt)");
        s.add("lambda", hyp.lambda_ic, "inferred-correlation decay constant");
        s.add("gamma-c", hyp.gamma_c, "crossing constant");
        s.add("out", out, "output file");
    }

    void run() const {
        const PathPair p = input.empty()
                               ? simulate_pair(model.p, horizon_days * kDailyDt, kDailyDt, substeps, stream_seed(seed, 0))
                               : read_path_csv(input, path_index);
        CointelationHypothesis h = hyp;
        if (std::isnan(h.rho)) h.rho = model.p.rho;
        if (std::isnan(h.kappa)) h.kappa = model.p.kappa * kDailyDt;
        const CointelationReport r = cointelation_test(p.x, p.y, h);
        const ZoneReport z = estimation_zones(p.x, p.y);
        auto os = open_file(out);
        os << "# columns: item,observed,expected,result seed: " << seed << '\n';
        for (const auto& c : r.lags) {
            os << "inferred_correlation_lag_" << c.delta_t << ',' << c.empirical << ',' << c.approximate << ','
               << (c.pass ? "pass" : "fail") << '\n';
        }
        os << "crossings_raw," << r.observed_crosses << ',' << r.expected_crosses << ','
           << (r.verdict == Verdict::NotApplicable ? "not-applicable" : (r.crossing_pass ? "pass" : "fail")) << '\n';
        os << "crossings_normalized," << r.observed_crosses_normalized << ',' << r.expected_crosses << ",info\n";
        os << "zone_b_plus," << z.b_plus << ",,info\n";
        os << "zone_b_minus," << z.b_minus << ",,info\n";
        os << "zone_rho_steps," << z.count(Zone::Rho) << ",,info\n";
        os << "zone_kappa_steps," << z.count(Zone::Kappa) << ",,info\n";
        os << "verdict,,," << to_string(r.verdict) << '\n';
        finish_file(os, out);
    }
};

struct MomentsCmd {
    ModelFlags model;
    double x_prev = 1.0, y_prev = 1.0, dt = kDailyDt;
    long mc_paths = 0;
    std::uint64_t seed = 1;
    std::string out = "moments.csv";

    void add(Settings& s) {
        model.add(s);
        s.add("x-prev", x_prev, "conditioning leading price");
        s.add("y-prev", y_prev, "conditioning lagging price");
        s.add("dt", dt, "horizon of the step (years)");
        s.add("mc-paths", mc_paths, "Monte Carlo paths for the oracle comparison (0 = off)");
        s.add("seed", seed, "root seed of the oracle");
        s.add("out", out, "output file");
    }

    void run() const {
        const MomentSet m = return_moments(model.p, x_prev, y_prev, dt);
        auto os = open_file(out);
        os << "# columns: quantity,closed_form,mc_estimate,mc_std_error seed: " << seed << '\n';
        std::optional<EmpiricalMoments> e;
        if (mc_paths > 0) {
            e = mc_moment_oracle(model.p, x_prev, y_prev, dt, static_cast<std::size_t>(mc_paths), seed);
        }
        auto row = [&](const char* name, double v, std::optional<MomentEstimate> mc) {
            os << name << ',' << v << ',';
            if (mc) {
                os << mc->value << ',';
                if (!std::isnan(mc->std_error)) os << mc->std_error;
            } else {
                os << ',';
            }
            os << '\n';
        };
        auto opt = [&](MomentEstimate EmpiricalMoments::* f) -> std::optional<MomentEstimate> {
            if (!e) return std::nullopt;
            return (*e).*f;
        };
        auto plain = [&](double EmpiricalMoments::* f) -> std::optional<MomentEstimate> {
            if (!e) return std::nullopt;
            return MomentEstimate{(*e).*f, std::numeric_limits<double>::quiet_NaN()};
        };
        row("mean_y", m.mean_y, opt(&EmpiricalMoments::mean_y));
        row("mean_xy", m.mean_xy, opt(&EmpiricalMoments::mean_xy));
        row("mean_y2", m.mean_y2, opt(&EmpiricalMoments::mean_y2));
        row("e_rx", m.e_rx, opt(&EmpiricalMoments::e_rx));
        row("e_ry", m.e_ry, opt(&EmpiricalMoments::e_ry));
        row("var_rx", m.var_rx, plain(&EmpiricalMoments::var_rx));
        row("var_ry", m.var_ry, plain(&EmpiricalMoments::var_ry));
        row("cov_rxy", m.cov_rxy, plain(&EmpiricalMoments::cov_rxy));
        row("a", m.a, std::nullopt);
        row("b", m.b, std::nullopt);
        row("c", m.c, std::nullopt);
        row("d", m.d, std::nullopt);
        os << "flagged," << (m.flagged ? 1 : 0) << ",,\n";
        finish_file(os, out);
        if (m.flagged) std::cerr << "warning: " << m.flag_reason << '\n';
    }
};

struct MvcCmd {
    ModelFlags model;
    double x_prev = 1.0, y_prev = 1.0, dt = kDailyDt, tau = kDefaultRiskTolerance;
    std::uint64_t seed = 1;
    std::string out = "mvc.csv";

    void add(Settings& s) {
        model.add(s);
        s.add("x-prev", x_prev, "conditioning leading price");
        s.add("y-prev", y_prev, "conditioning lagging price");
        s.add("dt", dt, "horizon of the step (years)");
        s.add("tau", tau, "risk tolerance");
        s.add("seed", seed, "seed of the Monte Carlo fallback");
        s.add("out", out, "output file");
    }

    void run() const {
        MomentSet m = return_moments(model.p, x_prev, y_prev, dt);
        const bool fallback = m.flagged;
        if (fallback) {
            m = moments_from_oracle(mc_moment_oracle(model.p, x_prev, y_prev, dt, kFallbackOraclePaths, seed), x_prev,
                                    y_prev, dt);
        }
        const MVCWeights w = mvc_weights(m, tau);
        auto os = open_file(out);
        os << "# columns: h1,h2,clipped,utility,mc_fallback seed: " << seed << '\n';
        os << w.h1 << ',' << w.h2 << ',' << (w.clipped ? 1 : 0) << ','
           << mvc_utility(w, mean_vector(m), covariance_matrix(m), tau) << ',' << (fallback ? 1 : 0) << '\n';
        finish_file(os, out);
    }
};

struct DgmTrainCmd {
    ModelFlags model;
    TrainFlags train;
    MertonParams merton;
    std::string problem = "cointelation";
    double gamma = 0.5;
    int horizon_days = 1000;
    int domain_paths = 200;
    std::uint64_t seed = 1;
    double x_lo = 0.5, x_hi = 2.0;
    std::string residual = "normalized";
    std::string checkpoint = "dgm.ckpt";
    std::string log = "dgm_log.csv";
    bool wall_time = false;

    void add(Settings& s) {
        model.add(s);
        train.add(s);
        s.add("problem", problem, "cointelation or merton");
        s.add("gamma", gamma, "risk aversion of the power utility");
        s.add("horizon-days", horizon_days, "cointelation: horizon T in trading days");
        s.add("domain-paths", domain_paths, "cointelation: paths used for the z-domain quantiles");
        s.add("seed", seed, "root seed of the z-domain simulation");
        s.add("residual", residual, "cointelation: raw or normalized residual");
        s.add("merton-mu", merton.mu, "Merton: drift");
        s.add("merton-sigma", merton.sigma, "Merton: volatility");
        s.add("merton-t", merton.T, "Merton: horizon (years)");
        s.add("x-lo", x_lo, "Merton: lower wealth edge");
        s.add("x-hi", x_hi, "Merton: upper wealth edge");
        s.add("checkpoint", checkpoint, "checkpoint output file");
        s.add("log", log, "training log output file");
        s.add_flag("wall-time", wall_time, "include wall-clock times in the training log");
    }

    void run() const {
        PDEProblem prob;
        if (problem == "merton") {
            MertonParams mp = merton;
            mp.gamma = gamma;
            prob = merton_problem(mp, x_lo, x_hi);
        } else if (problem == "cointelation") {
            const double T = horizon_days * kDailyDt;
            const ZDomain d = simulated_z_domain(model.p, 2.0 * T, domain_paths, stream_seed(seed, 0xD0A1));
            prob = cointelation_pde_problem(model.p, gamma, T, d, parse_residual_form(residual));
        } else {
            throw InvalidInput("problem must be cointelation or merton");
        }
        const TrainConfig cfg = train.config();
        DGMNetwork net = init_network(train.width, train.layers, train.init_seed, prob.normalization);
        anchor_output_bias(net, prob);
        const TrainReport rep = train_network(net, prob, cfg);
        save_checkpoint(checkpoint, net);
        auto os = open_file(log);
        write_training_log(os, rep, cfg.seed, wall_time);
        finish_file(os, log);
        std::cerr << "steps " << rep.steps_run << " final loss " << rep.final_loss << " clips " << rep.clip_events
                  << (rep.converged ? " converged" : "") << '\n';
        if (rep.diverged) throw NumericalFault("training diverged (loss > 1e6 for 100 consecutive steps)");
    }

    static TrainReport train_network(DGMNetwork& net, const PDEProblem& prob, const TrainConfig& cfg) {
        return cointel::train(net, prob, cfg);
    }
};

struct BacktestCmd {
    ModelFlags model;
    std::string strategy = "MVC";
    int horizon_days = 1000;
    int substeps = 8;
    std::uint64_t seed = 1;
    double tau = kDefaultRiskTolerance;
    double gamma = 0.5;
    std::string checkpoint;
    std::string band_model;
    int bands = kDefaultBandCount;
    double weight_step = kDefaultWeightStep;
    double w1 = 0.5, w2 = 0.5;
    bool one_book = false;
    std::string out = "trace.csv";

    void add(Settings& s) {
        model.add(s);
        s.add("strategy", strategy, "MVC, SC, DS, ML, ML_LS or fixed");
        s.add("horizon-days", horizon_days, "evaluation horizon (the path covers twice this)");
        s.add("substeps", substeps, "Euler substeps per step");
        s.add("seed", seed, "root seed");
        s.add("tau", tau, "MVC risk tolerance");
        s.add("gamma", gamma, "SC risk aversion");
        s.add("checkpoint", checkpoint, "trained DGM checkpoint (SC, DS)");
        s.add("band-model", band_model, "trained band table (ML, ML_LS); default trains on the first half");
        s.add("bands", bands, "band count when training");
        s.add("weight-step", weight_step, "band weight grid step");
        s.add("w1", w1, "fixed strategy: weight of the leading asset");
        s.add("w2", w2, "fixed strategy: weight of the lagging asset");
        s.add_flag("one-book", one_book, "DS: re-base the shadow books at every switch");
        s.add("out", out, "trace output file");
    }

    void run() const {
        detail::require(horizon_days >= 2, "horizon_days must be >= 2");
        const auto n = static_cast<std::size_t>(horizon_days);
        const std::uint64_t path_seed = stream_seed(seed, 1);
        const PathPair full = simulate_pair(model.p, 2.0 * n * kDailyDt, kDailyDt, substeps, path_seed);
        const PathPair train_part = full.slice(0, n);
        const PathPair eval = full.slice(n, 2 * n);
        const double T = horizon_days * kDailyDt;

        auto sc_rule = [&] {
            if (checkpoint.empty()) throw InvalidInput("strategy needs --checkpoint (train one with dgm-train)");
            auto net = std::make_shared<const DGMNetwork>(load_checkpoint(checkpoint));
            const ZDomain d = domain_from_map(net->input_map);
            return sc_strategy(net, model.p, gamma, T, d.z_lo, d.z_hi);
        };
        auto mvc_rule = [&] { return mvc_strategy(model.p, tau, kDailyDt, stream_seed(path_seed, 0x3C)); };
        auto band = [&](bool pairs_only) {
            if (!band_model.empty()) return std::make_shared<const BandModel>(load_band_model(band_model));
            return std::make_shared<const BandModel>(train_bandml(train_part, bands, weight_step, pairs_only));
        };

        StrategyTrace tr;
        if (strategy == "MVC") tr = run_strategy(eval, mvc_rule());
        else if (strategy == "SC") tr = run_strategy(eval, sc_rule());
        else if (strategy == "DS")
            tr = run_strategy(eval, dynamic_switching(sc_rule(), mvc_rule(),
                                                      one_book ? SwitchingMode::OneBook : SwitchingMode::TwoShadow));
        else if (strategy == "ML") tr = run_strategy(eval, live_strategy(band(false), "ML"));
        else if (strategy == "ML_LS") tr = run_strategy(eval, live_strategy(band(true), "ML_LS"));
        else if (strategy == "fixed") tr = run_strategy(eval, fixed_weights(w1, w2));
        else throw InvalidInput("unknown strategy '" + strategy + "'");

        auto os = open_file(out);
        write_trace(os, tr, seed);
        finish_file(os, out);
        std::cerr << tr.label << " return " << portfolio_return(tr) << '\n';
    }
};

struct BandmlTrainCmd {
    ModelFlags model;
    std::string input;
    int path_index = 0;
    int horizon_days = 1000;
    int substeps = 8;
    std::uint64_t seed = 1;
    int bands = kDefaultBandCount;
    double weight_step = kDefaultWeightStep;
    bool pairs_only = false;
    std::string out = "bands.csv";
    std::string fit_out;

    void add(Settings& s) {
        model.add(s);
        s.add("input", input, "simulate output to train on (default: simulate from the model flags)");
        s.add("path-index", path_index, "path to read from --input");
        s.add("horizon-days", horizon_days, "training steps to simulate when no input is given");
        s.add("substeps", substeps, "Euler substeps per step");
        s.add("seed", seed, "root seed");
        s.add("bands", bands, "band count");
        s.add("weight-step", weight_step, "weight grid step");
        s.add_flag("pairs-only", pairs_only, "restrict to long/short kinds");
        s.add("out", out, "trained band table output file");
        s.add("fit-out", fit_out, "optional per-band Gaussian fit output file");
    }

    void run() const {
        const PathPair p =
            input.empty() ? simulate_pair(model.p, horizon_days * kDailyDt, kDailyDt, substeps, stream_seed(seed, 1))
                                .slice(0, static_cast<std::size_t>(horizon_days))
                          : read_path_csv(input, path_index);
        const BandModel m = train_bandml(p, bands, weight_step, pairs_only);
        if (m.bands.h < bands) {
            std::cerr << "warning: repeated edges merged, " << m.bands.h << " of " << bands << " bands kept\n";
        }
        auto os = open_file(out);
        write_band_model(os, m, seed);
        finish_file(os, out);
        if (!fit_out.empty()) {
            std::vector<double> spread(p.x.size());
            for (std::size_t i = 0; i < spread.size(); ++i) spread[i] = p.x[i] - p.y[i];
            const BandGaussianFit fit = band_gaussian_fit(spread, m.bands);
            auto fs = open_file(fit_out);
            fs << "# columns: band,band_lo,band_hi,count,mean,stdev seed: " << seed << '\n';
            for (int b = 0; b < m.bands.h; ++b) {
                const auto i = static_cast<std::size_t>(b);
                fs << b << ',' << m.bands.lower(b) << ',' << m.bands.upper(b) << ',' << fit.count[i] << ','
                   << fit.mean[i] << ',' << fit.stdev[i] << '\n';
            }
            finish_file(fs, fit_out);
        }
    }
};

struct ExperimentCmd {
    ModelFlags model;
    TrainFlags train;
    ExperimentConfig cfg;
    std::string roster = "MVC,SC,DS,ML_LS,ML";
    std::string residual = "normalized";
    bool one_book = false;
    bool wall_time = false;
    bool quiet = false;

    void add(Settings& s) {
        model.add(s);
        train.add(s);
        s.add("horizon-days", cfg.horizon_days, "evaluation horizon (paths cover twice this)");
        s.add("n-paths", cfg.n_paths, "number of simulated paths");
        s.add("seed", cfg.seed, "root seed");
        s.add("roster", roster, "comma-separated strategies from MVC,SC,DS,ML_LS,ML");
        s.add("bands", cfg.bands, "band count");
        s.add("weight-step", cfg.weight_step, "band weight grid step");
        s.add("tau", cfg.tau, "MVC risk tolerance");
        s.add("gamma", cfg.gamma, "SC risk aversion");
        s.add("substeps", cfg.substeps, "Euler substeps per step");
        s.add("histogram-bins", cfg.histogram_bins, "bins of the excess-return histograms");
        s.add("illustrative-path", cfg.illustrative_path, "path exported with its weight series");
        s.add("domain-paths", cfg.dgm.domain_paths, "paths used for the z-domain quantiles");
        s.add("residual", residual, "raw or normalized HJB residual");
        s.add("checkpoint-in", cfg.dgm.checkpoint_in, "load this DGM checkpoint instead of training");
        s.add("out", cfg.output_dir, "output directory");
        s.add_flag("one-book", one_book, "DS: re-base the shadow books at every switch");
        s.add_flag("wall-time", wall_time, "include wall-clock times in the training log");
        s.add_flag("quiet", quiet, "suppress progress messages");
    }

    void run() {
        cfg.params = model.p;
        cfg.roster = split_roster(roster);
        cfg.dgm.train = train.config();
        cfg.dgm.width = train.width;
        cfg.dgm.layers = train.layers;
        cfg.dgm.init_seed = train.init_seed;
        cfg.dgm.residual_form = parse_residual_form(residual);
        cfg.switching = one_book ? SwitchingMode::OneBook : SwitchingMode::TwoShadow;

        TrainObserver on_step;
        PathObserver on_path;
        if (!quiet) {
            on_step = [&](const LossRecord& r) {
                if (r.step % 1000 == 0) std::cerr << "dgm step " << r.step << " loss " << r.loss << '\n';
            };
            on_path = [&](int i) {
                if ((i + 1) % 50 == 0 || i + 1 == cfg.n_paths) std::cerr << "paths " << i + 1 << '/' << cfg.n_paths << '\n';
            };
        }
        const ExperimentSummary s = run_experiment(cfg, on_step, on_path);
        emit_outputs(s, cfg.output_dir);
        if (s.dgm_report) {
            const std::string ckpt = (std::filesystem::path(cfg.output_dir) / "dgm.ckpt").string();
            save_checkpoint(ckpt, *s.dgm_net);
            const std::string log = (std::filesystem::path(cfg.output_dir) / "dgm_log.csv").string();
            auto os = open_file(log);
            write_training_log(os, *s.dgm_report, cfg.dgm.train.seed, wall_time);
            finish_file(os, log);
        }
        if (!quiet) {
            for (const auto& st : s.stats) {
                std::cerr << std::setw(6) << st.label << "  mean return " << st.mean << "  se " << st.std_error << '\n';
            }
            std::cerr << "ranking: " << s.ranking << '\n';
        }
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cointelated pairs: simulation, moments, DGM control and strategy backtests"};
    app.require_subcommand(1);

    SimulateCmd simulate;
    DiagnoseCmd diagnose;
    MomentsCmd moments;
    MvcCmd mvc;
    DgmTrainCmd dgm_train;
    BacktestCmd backtest;
    BandmlTrainCmd bandml_train;
    ExperimentCmd experiment;

    std::vector<std::unique_ptr<Settings>> settings;
    std::map<CLI::App*, std::function<void()>> runners;
    auto sub = [&](const char* name, const char* help, auto& cmd) {
        CLI::App* a = app.add_subcommand(name, help);
        settings.push_back(std::make_unique<Settings>(a));
        cmd.add(*settings.back());
        Settings* s = settings.back().get();
        runners[a] = [s, &cmd] {
            s->resolve();
            cmd.run();
        };
    };
    sub("simulate", "simulate cointelated (or generalized SDE) paths", simulate);
    sub("diagnose", "cointelation diagnostics on a simulated or supplied path", diagnose);
    sub("moments", "closed-form one-step moments, optionally against Monte Carlo", moments);
    sub("mvc", "mean-variance optimal weights for one step", mvc);
    sub("dgm-train", "train the DGM value network (cointelation HJB or Merton)", dgm_train);
    sub("backtest", "trade one strategy on a simulated path", backtest);
    sub("bandml-train", "train band-wise strategies on a path", bandml_train);
    sub("experiment", "multi-path comparison of all strategies", experiment);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    try {
        for (auto* s : app.get_subcommands()) runners.at(s)();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
