// Acceptance run: one PASS / FAIL line per criterion A1-A11.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "cointel/cointel.hpp"

using namespace cointel;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, SoftFail, Fail };

struct Outcome {
    Status status = Status::Fail;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); }

// ---------------------------------------------------------------------------

Outcome a1_a2(bool moments_only) {
    static const EmpiricalMoments mc = mc_moment_oracle(CointelationParams{}, 1.0, 1.0, kDailyDt, 200000, 101, true);
    const CointelationParams p;
    std::ostringstream os;
    bool ok = true;
    if (moments_only) {
        const RawMoments m = raw_moments(p, 1.0, 1.0, kDailyDt);
        auto check = [&](const char* name, double exact, const MomentEstimate& e) {
            const double z = std::abs(exact - e.value) / e.std_error;
            ok = ok && z <= 3.0;
            os << name << " " << z << " SE; ";
        };
        check("E[Y]", m.mean_y, mc.mean_y);
        check("E[XY]", m.mean_xy, mc.mean_xy);
        check("E[Y^2]", m.mean_y2, mc.mean_y2);
    } else {
        const MomentSet m = return_moments(p, 1.0, 1.0, kDailyDt);
        auto check = [&](const char* name, double approx, double target) {
            const double diff = std::abs(approx - target);
            const bool pass = diff <= 0.05 * std::abs(target) || diff <= 1e-5;
            ok = ok && pass;
            os << name << " rel " << diff / std::abs(target) << " abs " << diff << "; ";
        };
        check("e_ry", m.e_ry, mc.e_ry.value);
        check("var_ry", m.var_ry, mc.var_ry);
        check("cov_rxy", m.cov_rxy, mc.cov_rxy);
    }
    return {ok ? Status::Pass : Status::Fail, os.str()};
}

// Parameter offsets of every tensor, so each one is probed.
std::vector<std::pair<std::size_t, std::size_t>> tensors(const ParamLayout& lay) {
    const auto m = static_cast<std::size_t>(lay.width);
    std::vector<std::pair<std::size_t, std::size_t>> out{{lay.w1(), 2 * m}, {lay.b1(), m}};
    for (int l = 0; l < lay.layers; ++l)
        for (Gate g : {Gate::Z, Gate::G, Gate::R, Gate::H}) {
            out.emplace_back(lay.gate_u(l, g), 2 * m);
            out.emplace_back(lay.gate_w(l, g), m * m);
            out.emplace_back(lay.gate_b(l, g), m);
        }
    out.emplace_back(lay.w_out(), m);
    out.emplace_back(lay.b_out(), 1);
    return out;
}

Outcome a3() {
    const std::array<std::pair<int, int>, 3> sizes{{{1, 1}, {2, 10}, {3, 50}}};
    const InputMap map{0.5, 2.0, 1.0, 1.5};
    Rng rng(103);
    double worst_input = 0.0, worst_param = 0.0;
    long checked = 0;
    for (int c = 0; c < 100; ++c) {
        const auto [layers, width] = sizes[static_cast<std::size_t>(c % 3)];
        DGMNetwork net = init_network(width, layers, 1000 + c, map);
        for (double& v : net.theta) v += rng.uniform(-0.05, 0.05);
        const double t = rng.uniform(0.0, 1.0), z = rng.uniform(0.3, 1.7);
        const double h = 1e-4;
        const EvalResult e = forward_with_input_derivs(net, t, z);
        const double ft = (forward(net, t + h, z) - forward(net, t - h, z)) / (2 * h);
        const double fz = (forward(net, t, z + h) - forward(net, t, z - h)) / (2 * h);
        const double fzz =
            (forward_with_input_derivs(net, t, z + h).f_z - forward_with_input_derivs(net, t, z - h).f_z) / (2 * h);
        worst_input = std::max({worst_input, rel_err(e.f_t, ft), rel_err(e.f_z, fz), rel_err(e.f_zz, fzz)});

        const EvalResult adj{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        auto objective = [&](const DGMNetwork& n) {
            const EvalResult r = forward_with_input_derivs(n, t, z);
            return adj.f * r.f + adj.f_t * r.f_t + adj.f_z * r.f_z + adj.f_zz * r.f_zz;
        };
        const ParamGradient g = backward(net, t, z, adj);
        std::vector<std::size_t> coords;
        if (width <= 10) {
            for (std::size_t i = 0; i < net.theta.size(); ++i) coords.push_back(i);
        } else {
            for (const auto& [off, len] : tensors(net.layout()))
                for (int k = 0; k < 3; ++k) coords.push_back(off + static_cast<std::size_t>(rng.uniform() * len) % len);
        }
        for (std::size_t i : coords) {
            DGMNetwork up = net, dn = net;
            up.theta[i] += 1e-6;
            dn.theta[i] -= 1e-6;
            worst_param = std::max(worst_param, rel_err(g.values[i], (objective(up) - objective(dn)) / 2e-6));
            ++checked;
        }
    }
    const bool ok = worst_input < 1e-5 && worst_param < 1e-5;
    std::ostringstream os;
    os << "max rel err inputs " << worst_input << ", parameters " << worst_param << " over " << checked
       << " coordinates";
    return {ok ? Status::Pass : Status::Fail, os.str()};
}

Outcome a4() {
    const MertonParams mp;
    const PDEProblem prob = merton_problem(mp);
    DGMNetwork net = init_network(20, 2, 7, prob.normalization);
    TrainConfig c;
    c.optimizer = Optimizer::Adam;
    c.alpha0 = 1e-3;
    c.lambda_decay = 0.9995;
    c.max_steps = 3000;
    c.batch_interior = 128;
    c.batch_terminal = 64;
    c.batch_boundary = 32;
    train(net, prob, c);
    double interior = 0.0, global = 0.0;
    for (int i = 0; i <= 40; ++i)
        for (int j = 0; j <= 40; ++j) {
            const double t = mp.T * i / 40.0, x = 0.5 + 1.5 * j / 40.0;
            const double e = std::abs(forward(net, t, x) / merton_analytic(mp, t, x) - 1.0);
            global = std::max(global, e);
            if (t >= 0.05 * mp.T) interior = std::max(interior, e);
        }
    std::ostringstream os;
    os << "max rel error interior " << interior * 100 << "%, global " << global * 100 << "%";
    return {interior <= 0.02 && global <= 0.05 ? Status::Pass : Status::Fail, os.str()};
}

// Reference-parameter SC network shared by A5 and A6/A7.
struct SharedNet {
    ExperimentConfig cfg;
    std::string checkpoint;
    Outcome a5;
};

SharedNet a5_train() {
    SharedNet s;
    ExperimentConfig& cfg = s.cfg;
    cfg.n_paths = 500;
    cfg.horizon_days = 1000;
    cfg.seed = 20240101;
    cfg.dgm.width = 32;
    cfg.dgm.layers = 3;
    cfg.dgm.train.max_steps = 50000;
    cfg.dgm.train.tolerance = 1e-30;

    const double T = cfg.horizon_years();
    const ZDomain d = simulated_z_domain(cfg.params, 2.0 * T, cfg.dgm.domain_paths, stream_seed(cfg.seed, 0xD0A1));
    const PDEProblem prob = cointelation_pde_problem(cfg.params, cfg.gamma, T, d, ResidualForm::Normalized);
    const PDEProblem raw = cointelation_pde_problem(cfg.params, cfg.gamma, T, d, ResidualForm::Raw);
    DGMNetwork net = init_network(cfg.dgm.width, cfg.dgm.layers, cfg.dgm.init_seed, prob.normalization);
    anchor_output_bias(net, prob);

    // Held-out points from a stream the sampler never uses.
    Rng rng(stream_seed(cfg.seed, 0xA5));
    Eigen::VectorXd ht(2000), hz(2000);
    for (int i = 0; i < 2000; ++i) {
        ht(i) = rng.uniform(0.0, T);
        hz(i) = rng.uniform(d.z_lo, d.z_hi);
    }
    const double n0 = residual_rms(net, prob, ht, hz), r0 = residual_rms(net, raw, ht, hz);
    const TrainReport rep = train(net, prob, cfg.dgm.train);
    const double n1 = residual_rms(net, prob, ht, hz), r1 = residual_rms(net, raw, ht, hz);
    double terminal = 0.0;
    for (int j = 0; j <= 200; ++j) terminal = std::max(terminal, std::abs(forward(net, T, d.z_lo + (d.z_hi - d.z_lo) * j / 200.0) - 1.0));

    const bool ok = n0 / n1 >= 100.0 && r0 / r1 >= 100.0 && terminal <= 1e-2 && !rep.diverged;
    std::ostringstream os;
    os << "residual drop normalized " << n0 / n1 << "x (" << n0 << " -> " << n1 << "), raw " << r0 / r1 << "x ("
       << r0 << " -> " << r1 << "); terminal max|f-1| " << terminal << "; " << rep.steps_run << " steps, "
       << fmt("%.0f s", rep.wall_time);
    s.a5 = {ok ? Status::Pass : Status::Fail, os.str()};

    s.checkpoint = (fs::temp_directory_path() / "cointel_acceptance_sc.ckpt").string();
    save_checkpoint(s.checkpoint, net);
    cfg.dgm.checkpoint_in = s.checkpoint;
    return s;
}

std::pair<Outcome, Outcome> a6_a7(const SharedNet& shared) {
    const auto start = std::chrono::steady_clock::now();
    const ExperimentSummary s = run_experiment(shared.cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto mean = [&](const char* l) { return s.stat(l).mean; };
    auto se = [&](const char* l) { return s.stat(l).std_error; };
    auto combined = [&](const char* a, const char* b) { return std::sqrt(se(a) * se(a) + se(b) * se(b)); };

    std::ostringstream o6;
    o6 << "mean returns DS " << mean("DS") << ", SC " << mean("SC") << ", MVC " << mean("MVC") << "; DS-SC "
       << mean("DS") - mean("SC") << " vs 2 SE " << 2 * combined("DS", "SC") << "; " << fmt("%.0f s", secs);
    const bool ok6 = mean("DS") > mean("SC") && mean("SC") > mean("MVC") &&
                     mean("DS") - mean("SC") > 2.0 * combined("DS", "SC");

    const double win = s.win_rate("ML", "DS");
    const bool in_bracket = win >= 0.45 && win <= 0.65;
    const bool inverted = mean("SC") - mean("ML_LS") > 2.0 * combined("SC", "ML_LS") ||
                          mean("DS") - mean("ML") > 2.0 * combined("DS", "ML");
    const bool ordered = mean("SC") < mean("ML_LS") && mean("DS") < mean("ML");
    std::ostringstream o7;
    o7 << "ML beats FM on " << win * 100 << "% of paths; means SC " << mean("SC") << ", ML_LS " << mean("ML_LS")
       << ", FM " << mean("DS") << ", ML " << mean("ML") << "; ranking " << s.ranking;
    Status st7 = Status::Pass;
    if (inverted) st7 = Status::Fail;
    else if (!in_bracket || !ordered) st7 = Status::SoftFail;
    return {{ok6 ? Status::Pass : Status::Fail, o6.str()}, {st7, o7.str()}};
}

Outcome a8() {
    Rng rng(108);
    int agree = 0;
    std::string first_miss;
    for (int c = 0; c < 100; ++c) {
        const PathPair path = simulate_pair(CointelationParams{}, 500 * kDailyDt, kDailyDt, 8, stream_seed(108, c));
        std::vector<double> spread(path.x.size());
        for (std::size_t i = 0; i < spread.size(); ++i) spread[i] = path.x[i] - path.y[i];
        std::sort(spread.begin(), spread.end());
        const auto i0 = static_cast<std::size_t>(rng.uniform() * 0.8 * spread.size());
        const auto i1 = std::min(spread.size() - 1, i0 + 10 + static_cast<std::size_t>(rng.uniform() * 0.3 * spread.size()));
        const double lo = spread[i0], hi = spread[i1];
        const BandStrategy got = select_best(optimize_band(path, lo, hi));

        // Exhaustive search, stepping the path for every candidate.
        BandKind best_kind = BandKind::PP;
        double best_w = 0.0, best = -1e300;
        for (int k = 0; k < 3; ++k) {
            const auto kind = static_cast<BandKind>(k);
            double kind_best = -1e300, kind_w = 0.0;
            for (int j = 0; j <= 1000; ++j) {
                const double w = j * 1e-3;
                double pnl = 0.0;
                for (std::size_t t = 0; t + 1 < path.x.size(); ++t) {
                    const double s = path.x[t] - path.y[t];
                    if (!(lo < s && s <= hi)) continue;
                    const StepWeights sw = kind_weights(kind, w);
                    pnl += sw.w1 * (path.x[t + 1] - path.x[t]) + sw.w2 * (path.y[t + 1] - path.y[t]);
                }
                if (pnl > kind_best) {
                    kind_best = pnl;
                    kind_w = w;
                }
            }
            if (kind_best > best) {
                best = kind_best;
                best_kind = kind;
                best_w = kind_w;
            }
        }
        if (got.kind == best_kind && got.w == best_w) ++agree;
        else if (first_miss.empty()) {
            first_miss = "; first mismatch case " + std::to_string(c) + ": " + to_string(got.kind) + " " +
                         std::to_string(got.w) + " vs " + to_string(best_kind) + " " + std::to_string(best_w);
        }
    }
    return {agree == 100 ? Status::Pass : Status::Fail, std::to_string(agree) + "/100 cases agree" + first_miss};
}

// Reference coefficients in per-step units (dt = 1 step).
CointelationParams per_step_params(double kappa) {
    CointelationParams p;
    p.mu = 0.05 / 252.0;
    p.sigma = 0.17 / std::sqrt(252.0);
    p.eta = 0.16 / std::sqrt(252.0);
    p.kappa = kappa;
    return p;
}

double mean_crosses(double kappa, int n_obs, int paths) {
    double sum = 0.0;
    for (int i = 0; i < paths; ++i) {
        const PathPair q = simulate_pair(per_step_params(kappa), n_obs - 1, 1.0, 8, stream_seed(109, i));
        sum += static_cast<double>(count_crosses(q.x, q.y));
    }
    return sum / paths;
}

Outcome a9() {
    const int n = 1000, paths = 400;
    std::vector<CrossingSample> controls;
    for (int i = 0; i < paths; ++i) {
        const PathPair q = simulate_pair(per_step_params(0.0), n - 1, 1.0, 8, stream_seed(190, i));
        controls.push_back({0.0, static_cast<double>(n), static_cast<double>(count_crosses(q.x, q.y))});
    }
    const double gamma = fit_crossing_gamma(controls);
    std::ostringstream os;
    os << "gamma " << gamma << ";";
    bool ok = true;
    for (double k : {0.05, 0.1, 0.2}) {
        const double observed = mean_crosses(k, n, paths);
        const double predicted = expected_crosses(k, n, gamma);
        const double rel = (predicted - observed) / observed;
        ok = ok && std::abs(rel) <= 0.15;
        os << " kappa " << k << ": MC " << observed << " vs Eq " << predicted << " (" << fmt("%+.1f%%", rel * 100)
           << ")";
    }
    return {ok ? Status::Pass : Status::Fail, os.str()};
}

Outcome a10() {
    CointelationParams p;
    p.rho = -1.0;
    p.kappa = 0.1;
    p.sigma = 0.01;
    p.eta = 0.01;
    p.mu = 0.0;
    const std::vector<std::size_t> lags{1, 2, 5, 10, 22, 50, 100, 252};
    std::vector<double> avg(lags.size(), 0.0);
    const int paths = 20;
    for (int i = 0; i < paths; ++i) {
        const PathPair q = simulate_pair(p, 10000.0, 1.0, 8, stream_seed(110, i));
        for (std::size_t k = 0; k < lags.size(); ++k) avg[k] += measured_correlation(q.x, q.y, lags[k]) / paths;
    }
    bool increasing = true;
    for (std::size_t k = 1; k < lags.size(); ++k) increasing = increasing && avg[k] > avg[k - 1];
    const bool ok = avg.front() < 0.0 && increasing && avg.back() > 0.0;
    std::ostringstream os;
    os << "mean correlation by lag:";
    for (std::size_t k = 0; k < lags.size(); ++k) os << " " << lags[k] << "->" << fmt("%.3f", avg[k]);
    return {ok ? Status::Pass : Status::Fail, os.str()};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(COINTEL_CLI) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::string> cli_script(const std::string& d) {
    const std::string small = " --width 4 --layers 1 --max-steps 30 --domain-paths 20 --horizon-days 60";
    return {
        "simulate --paths 2 --horizon-days 600 --seed 11 --out " + d + "/sim.csv",
        "simulate --model generalized --theta 2 --alpha 0.5 --beta 1 --p0 0.3 --seed 11 --horizon-days 200 --out " +
            d + "/gen.csv",
        "diagnose --input " + d + "/sim.csv --path-index 1 --seed 11 --out " + d + "/diagnose.csv",
        "diagnose --horizon-days 600 --seed 12 --out " + d + "/diagnose_sim.csv",
        "moments --mc-paths 2000 --seed 11 --out " + d + "/moments.csv",
        "mvc --x-prev 1.1 --y-prev 0.9 --seed 11 --out " + d + "/mvc.csv",
        "dgm-train --problem cointelation" + small + " --seed 11 --checkpoint " + d + "/sc.ckpt --log " + d +
            "/sc_log.csv",
        "dgm-train --problem merton --width 4 --layers 1 --max-steps 30 --checkpoint " + d + "/merton.ckpt --log " +
            d + "/merton_log.csv",
        "backtest --strategy MVC --horizon-days 60 --seed 11 --out " + d + "/bt_mvc.csv",
        "backtest --strategy SC --horizon-days 60 --seed 11 --checkpoint " + d + "/sc.ckpt --out " + d + "/bt_sc.csv",
        "backtest --strategy DS --horizon-days 60 --seed 11 --checkpoint " + d + "/sc.ckpt --out " + d + "/bt_ds.csv",
        "backtest --strategy ML --horizon-days 60 --seed 11 --out " + d + "/bt_ml.csv",
        "backtest --strategy ML_LS --horizon-days 60 --seed 11 --out " + d + "/bt_mlls.csv",
        "backtest --strategy fixed --w1 1 --w2 0 --horizon-days 60 --seed 11 --out " + d + "/bt_fixed.csv",
        "bandml-train --input " + d + "/sim.csv --seed 11 --out " + d + "/bands.csv --fit-out " + d + "/fit.csv",
        "backtest --strategy ML --band-model " + d + "/bands.csv --horizon-days 60 --seed 11 --out " + d +
            "/bt_ml_table.csv",
        "experiment" + small + " --n-paths 3 --seed 11 --quiet --out " + d + "/experiment",
    };
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Outcome a11() {
    const fs::path root = fs::temp_directory_path() / "cointel_acceptance_a11";
    fs::remove_all(root);
    std::array<fs::path, 2> dirs{root / "run1", root / "run2"};
    for (const auto& d : dirs) {
        fs::create_directories(d);
        for (const auto& args : cli_script(d.string())) {
            const int rc = run_cli(args);
            if (rc != 0) return {Status::Fail, "exit " + std::to_string(rc) + " from: cointel " + args};
        }
    }
    int files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), dirs[0]);
        if (!fs::exists(dirs[1] / rel)) return {Status::Fail, "missing in rerun: " + rel.string()};
        if (slurp(entry.path()) != slurp(dirs[1] / rel)) return {Status::Fail, "differs on rerun: " + rel.string()};
        ++files;
    }
    return {Status::Pass, std::to_string(files) + " files from " + std::to_string(cli_script("").size()) +
                              " commands byte-identical"};
}

} // namespace

int main(int argc, char** argv) {
    // Optional arguments select criteria by id; none runs all.
    std::vector<std::string> only(argv + 1, argv + argc);
    auto selected = [&](const std::string& id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    if (!only.empty() && (selected("A6") || selected("A7"))) only.insert(only.end(), {"A5", "A6", "A7"});
    int failures = 0;
    auto report = [&](const char* id, const char* name, const std::function<Outcome()>& fn) {
        if (!selected(id)) return;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {Status::Fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* tag = o.status == Status::Pass ? "PASS" : (o.status == Status::SoftFail ? "SOFT-FAIL" : "FAIL");
        if (o.status == Status::Fail) ++failures;
        std::cout << id << " " << tag << "  " << name << ": " << o.detail << fmt("  [%.1f s]", secs) << std::endl;
    };

    report("A1", "moment exactness", [] { return a1_a2(true); });
    report("A2", "return-moment approximation", [] { return a1_a2(false); });
    report("A3", "autodiff correctness", a3);
    report("A4", "Merton benchmark", a4);
    SharedNet shared;
    report("A5", "cointelation PDE training", [&] {
        shared = a5_train();
        return shared.a5;
    });
    std::pair<Outcome, Outcome> strat{{Status::Fail, "not run"}, {Status::Fail, "not run"}};
    report("A6", "strategy ordering", [&] {
        if (shared.checkpoint.empty()) return Outcome{Status::Fail, "no trained network"};
        strat = a6_a7(shared);
        return strat.first;
    });
    report("A7", "ML vs FM win rate", [&] { return strat.second; });
    report("A8", "band optimizer oracle", a8);
    report("A9", "crossing formula", a9);
    report("A10", "correlation sweep", a10);
    report("A11", "determinism", a11);
    std::cout << (failures == 0 ? "all criteria met" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
