#pragma once

// Deep Galerkin training over pluggable PDE problems.
//
// A problem supplies a residual R(t, z, f, f_t, f_z, f_zz), a terminal value
// g(z) at t = T and optional Dirichlet data on the z-edges. Each step draws
// random interior, terminal and boundary points and descends on
//
//   L = w_i mean R^2 + w_T mean (f(T, z) - g(z))^2 + w_B mean (f(t, z_b) - b(t, z_b))^2.
//
// Residuals are written once as templates over a scalar type; evaluating them
// on Dual numbers yields dR/d(f, f_t, f_z, f_zz), which seed the network's
// reverse pass.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cointel/error.hpp"
#include "cointel/net.hpp"
#include "cointel/rng.hpp"
#include "cointel/sim.hpp"

namespace cointel {

/// Value plus partials with respect to (f, f_t, f_z, f_zz).
struct Dual {
    double v = 0.0;
    std::array<double, 4> d{};

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: constants promote implicitly
    static Dual variable(double value, int slot) {
        Dual x(value);
        x.d[static_cast<std::size_t>(slot)] = 1.0;
        return x;
    }
};

inline Dual operator+(const Dual& a, const Dual& b) {
    Dual r(a.v + b.v);
    for (std::size_t i = 0; i < 4; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
}
inline Dual operator-(const Dual& a, const Dual& b) {
    Dual r(a.v - b.v);
    for (std::size_t i = 0; i < 4; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
}
inline Dual operator-(const Dual& a) {
    Dual r(-a.v);
    for (std::size_t i = 0; i < 4; ++i) r.d[i] = -a.d[i];
    return r;
}
inline Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.v * b.v);
    for (std::size_t i = 0; i < 4; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
}
inline Dual operator/(const Dual& a, const Dual& b) {
    Dual r(a.v / b.v);
    for (std::size_t i = 0; i < 4; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) / b.v;
    return r;
}

/// Residual evaluated on Duals; `.v` is the residual, `.d` its sensitivities.
using ResidualFn = std::function<Dual(double t, double z, const Dual& f, const Dual& f_t, const Dual& f_z,
                                      const Dual& f_zz)>;
using TerminalFn = std::function<double(double z)>;
using BoundaryFn = std::function<double(double t)>;

struct PDEProblem {
    std::string name;
    ResidualFn residual;
    TerminalFn terminal_value;
    /// Dirichlet data at z = z_lo / z = z_hi; empty when the edge is free.
    BoundaryFn lower_boundary;
    BoundaryFn upper_boundary;
    double T = 1.0;
    double z_lo = 0.0;
    double z_hi = 1.0;
    double interior_weight = 1.0;
    double terminal_weight = 1.0;
    double boundary_weight = 1.0;
    InputMap normalization;

    void validate() const {
        detail::require(static_cast<bool>(residual) && static_cast<bool>(terminal_value),
                        "PDE problem needs a residual and a terminal condition");
        detail::require(std::isfinite(T) && T > 0.0, "PDE horizon T must be > 0");
        detail::require(std::isfinite(z_lo) && std::isfinite(z_hi) && z_lo < z_hi, "PDE domain needs z_lo < z_hi");
        detail::require(interior_weight >= 0.0 && terminal_weight >= 0.0 && boundary_weight >= 0.0,
                        "loss weights must be >= 0");
    }

    double residual_value(double t, double z, const EvalResult& e) const {
        return residual(t, z, e.f, e.f_t, e.f_z, e.f_zz).v;
    }
    bool has_boundary() const { return static_cast<bool>(lower_boundary) || static_cast<bool>(upper_boundary); }
};

/// Maps [0, T] x [z_lo, z_hi] onto [-1, 1]^2.
inline InputMap unit_box_map(double T, double z_lo, double z_hi) {
    return {0.5 * T, 2.0 / T, 0.5 * (z_lo + z_hi), 2.0 / (z_hi - z_lo)};
}

enum class Optimizer { Sgd, Adam };

inline const char* to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

inline Optimizer parse_optimizer(const std::string& s) {
    if (s == "sgd") return Optimizer::Sgd;
    if (s == "adam") return Optimizer::Adam;
    throw InvalidInput("unknown optimizer '" + s + "' (expected sgd or adam)");
}

struct TrainConfig {
    double alpha0 = 1e-3;
    double lambda_decay = 0.9999;
    int batch_interior = 128;
    int batch_terminal = 64;
    int batch_boundary = 32;
    long max_steps = 100000;
    double tolerance = 1e-8;
    std::uint64_t seed = 1;
    double clip_threshold = 1e3;
    Optimizer optimizer = Optimizer::Sgd;
    /// Loss is recorded every `log_every` steps (and at the last step).
    long log_every = 100;

    void validate() const {
        detail::require(std::isfinite(alpha0) && alpha0 > 0.0, "alpha0 must be > 0");
        detail::require(lambda_decay > 0.0 && lambda_decay < 1.0, "lambda_decay must lie in (0, 1)");
        detail::require(batch_interior >= 1 && batch_terminal >= 1 && batch_boundary >= 1, "batch sizes must be >= 1");
        detail::require(max_steps >= 0, "max_steps must be >= 0");
        detail::require(tolerance > 0.0, "tolerance must be > 0");
        detail::require(clip_threshold > 0.0, "clip threshold must be > 0");
        detail::require(log_every >= 1, "log_every must be >= 1");
    }

    /// alpha_n = alpha0 lambda^n.
    double learning_rate(long step) const { return alpha0 * std::pow(lambda_decay, static_cast<double>(step)); }
};

struct LossRecord {
    long step = 0;
    double loss = 0.0;
    double alpha = 0.0;
    double wall_time = 0.0;
};

struct TrainReport {
    long steps_run = 0;
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    std::vector<LossRecord> loss_history;
    double wall_time = 0.0;
    long clip_events = 0;
    long skipped_steps = 0;
    bool converged = false;
    bool diverged = false;
};

struct Batch {
    Eigen::VectorXd t_interior, z_interior;
    Eigen::VectorXd z_terminal;
    Eigen::VectorXd t_boundary, z_boundary;
    Eigen::VectorXd boundary_target;
};

/// Uniform draws over the domain, deterministic per (config.seed, step_index).
/// Boundary points alternate between the constrained edges.
inline Batch sample_batch(const PDEProblem& problem, const TrainConfig& config, long step_index) {
    detail::require(config.batch_interior >= 1 && config.batch_terminal >= 1, "batch sizes must be >= 1");
    Rng rng(stream_seed(config.seed, static_cast<std::uint64_t>(step_index)));
    Batch b;
    b.t_interior.resize(config.batch_interior);
    b.z_interior.resize(config.batch_interior);
    for (int i = 0; i < config.batch_interior; ++i) {
        b.t_interior(i) = rng.uniform(0.0, problem.T);
        b.z_interior(i) = rng.uniform(problem.z_lo, problem.z_hi);
    }
    b.z_terminal.resize(config.batch_terminal);
    for (int i = 0; i < config.batch_terminal; ++i) b.z_terminal(i) = rng.uniform(problem.z_lo, problem.z_hi);

    std::vector<std::pair<double, const BoundaryFn*>> edges;
    if (problem.lower_boundary) edges.emplace_back(problem.z_lo, &problem.lower_boundary);
    if (problem.upper_boundary) edges.emplace_back(problem.z_hi, &problem.upper_boundary);
    if (!edges.empty()) {
        const int n = config.batch_boundary;
        b.t_boundary.resize(n);
        b.z_boundary.resize(n);
        b.boundary_target.resize(n);
        for (int i = 0; i < n; ++i) {
            const auto& [z_edge, fn] = edges[static_cast<std::size_t>(i) % edges.size()];
            b.t_boundary(i) = rng.uniform(0.0, problem.T);
            b.z_boundary(i) = z_edge;
            b.boundary_target(i) = (*fn)(b.t_boundary(i));
        }
    }
    return b;
}

struct LossParts {
    double interior = 0.0;  // mean R^2
    double terminal = 0.0;  // mean (f(T, z) - g)^2
    double boundary = 0.0;  // mean (f - b)^2 on the edges
};

/// Loss and its exact parameter gradient on one batch.
inline ParamGradient loss(const DGMNetwork& net, const PDEProblem& problem, const Batch& batch,
                          LossParts* parts = nullptr) {
    const std::size_t n_par = net.parameter_count();
    ParamGradient total;
    total.values.assign(n_par, 0.0);
    LossParts lp;

    auto accumulate = [&](const ParamGradient& g) {
        for (std::size_t i = 0; i < n_par; ++i) total.values[i] += g.values[i];
    };

    // Interior residual: needs the full jet and the residual sensitivities.
    const Eigen::Index ni = batch.t_interior.size();
    if (ni > 0 && problem.interior_weight > 0.0) {
        const EvalBatch e = forward_with_input_derivs(net, batch.t_interior, batch.z_interior);
        Adjoints adj = Adjoints::zeros(ni);
        const double scale = 2.0 * problem.interior_weight / static_cast<double>(ni);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < ni; ++i) {
            const Dual r = problem.residual(batch.t_interior(i), batch.z_interior(i), Dual::variable(e.f(i), 0),
                                            Dual::variable(e.f_t(i), 1), Dual::variable(e.f_z(i), 2),
                                            Dual::variable(e.f_zz(i), 3));
            if (!std::isfinite(r.v)) {
                std::ostringstream msg;
                msg << std::setprecision(17) << "non-finite residual at (t, z) = (" << batch.t_interior(i) << ", "
                    << batch.z_interior(i) << ")";
                throw NumericalFault(msg.str());
            }
            sum += r.v * r.v;
            adj.f(i) = scale * r.v * r.d[0];
            adj.f_t(i) = scale * r.v * r.d[1];
            adj.f_z(i) = scale * r.v * r.d[2];
            adj.f_zz(i) = scale * r.v * r.d[3];
        }
        lp.interior = sum / static_cast<double>(ni);
        accumulate(backward(net, batch.t_interior, batch.z_interior, adj));
    }

    // Value-matching terms only seed the f adjoint.
    auto value_term = [&](const Eigen::VectorXd& t, const Eigen::VectorXd& z, const Eigen::VectorXd& target,
                          double weight, double& mean_sq) {
        const Eigen::Index n = t.size();
        if (n == 0 || weight <= 0.0) return;
        const Eigen::RowVectorXd f = forward(net, t, z);
        Adjoints adj = Adjoints::zeros(n);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double err = f(i) - target(i);
            if (!std::isfinite(err)) throw NumericalFault("non-finite network output on a value-matching point");
            sum += err * err;
            adj.f(i) = 2.0 * weight * err / static_cast<double>(n);
        }
        mean_sq = sum / static_cast<double>(n);
        accumulate(backward(net, t, z, adj));
    };

    const Eigen::Index nt = batch.z_terminal.size();
    Eigen::VectorXd terminal_target(nt);
    for (Eigen::Index i = 0; i < nt; ++i) terminal_target(i) = problem.terminal_value(batch.z_terminal(i));
    value_term(Eigen::VectorXd::Constant(nt, problem.T), batch.z_terminal, terminal_target, problem.terminal_weight,
               lp.terminal);
    value_term(batch.t_boundary, batch.z_boundary, batch.boundary_target, problem.boundary_weight, lp.boundary);

    total.loss = problem.interior_weight * lp.interior + problem.terminal_weight * lp.terminal +
                 problem.boundary_weight * lp.boundary;
    if (parts) *parts = lp;
    return total;
}

inline constexpr double kDivergenceLoss = 1e6;
inline constexpr long kDivergencePatience = 100;

namespace detail {

struct AdamState {
    std::vector<double> m, v;
    long t = 0;
    static constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void step(DGMNetwork& net, const ParamGradient& g, double alpha) {
        if (m.empty()) {
            m.assign(net.theta.size(), 0.0);
            v.assign(net.theta.size(), 0.0);
        }
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < net.theta.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g.values[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g.values[i] * g.values[i];
            net.theta[i] -= alpha * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

} // namespace detail

/// Per-step callback; receives the record of every step (not only logged ones).
using TrainObserver = std::function<void(const LossRecord&)>;

/// Training loop: sample, evaluate loss, descend with alpha_n = alpha0 lambda^n,
/// until loss <= tolerance or max_steps. Non-finite gradients skip the step;
/// gradients with norm above the clip threshold are rescaled onto it.
inline TrainReport train(DGMNetwork& net, const PDEProblem& problem, const TrainConfig& config,
                         const TrainObserver& observer = {}) {
    problem.validate();
    config.validate();
    detail::require(net.parameter_count() == net.layout().size(), "network parameters do not match its layout");

    TrainReport report;
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    detail::AdamState adam;
    long above_limit = 0;

    for (long step = 0; step < config.max_steps; ++step) {
        const double alpha = config.learning_rate(step);
        const Batch batch = sample_batch(problem, config, step);
        ParamGradient g = loss(net, problem, batch);
        const LossRecord rec{step, g.loss, alpha, elapsed()};
        report.steps_run = step + 1;
        report.final_loss = g.loss;
        if (step % config.log_every == 0 || step + 1 == config.max_steps) report.loss_history.push_back(rec);
        if (observer) observer(rec);

        if (g.loss <= config.tolerance) {
            report.converged = true;
            if (report.loss_history.back().step != step) report.loss_history.push_back(rec);
            break;
        }
        above_limit = g.loss > kDivergenceLoss ? above_limit + 1 : 0;
        if (above_limit >= kDivergencePatience) {
            report.diverged = true;
            if (report.loss_history.back().step != step) report.loss_history.push_back(rec);
            break;
        }
        if (!g.all_finite()) {
            ++report.skipped_steps;
            continue;
        }
        const double norm = std::sqrt(g.squared_norm());
        if (norm > config.clip_threshold) {
            const double s = config.clip_threshold / norm;
            for (double& v : g.values) v *= s;
            ++report.clip_events;
        }
        if (config.optimizer == Optimizer::Adam) {
            adam.step(net, g, alpha);
        } else if (!sgd_step(net, g, alpha)) {
            ++report.skipped_steps;
        }
    }
    if (report.loss_history.empty()) {
        // max_steps == 0: record the untouched network's loss.
        const ParamGradient g = loss(net, problem, sample_batch(problem, config, 0));
        report.final_loss = g.loss;
        report.loss_history.push_back({0, g.loss, config.alpha0, elapsed()});
    }
    report.wall_time = elapsed();
    return report;
}

/// Delimited training log. wall_time is nondeterministic, so it is written
/// only on request.
inline void write_training_log(std::ostream& os, const TrainReport& report, std::uint64_t seed,
                               bool include_wall_time) {
    os << "# columns: step,loss,alpha" << (include_wall_time ? ",wall_time" : "") << " seed: " << seed << '\n';
    os << std::setprecision(17);
    for (const auto& r : report.loss_history) {
        os << r.step << ',' << r.loss << ',' << r.alpha;
        if (include_wall_time) os << ',' << r.wall_time;
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Merton benchmark: maximize E[X_T^gamma / gamma] for a single risky asset
// with drift mu and volatility sigma (zero interest). The HJB
//   V_t + sup_pi [pi mu x V_x + 1/2 pi^2 sigma^2 x^2 V_xx] = 0
// reduces, after eliminating pi and multiplying through by V_xx, to
//   V_t V_xx - mu^2 / (2 sigma^2) V_x^2 = 0.

struct MertonParams {
    double mu = 0.2;
    double sigma = 0.25;
    double gamma = 0.5;
    double T = 1.0;

    void validate() const {
        detail::require(std::isfinite(mu) && std::isfinite(sigma) && std::isfinite(gamma) && std::isfinite(T),
                        "Merton parameters must be finite");
        detail::require(sigma > 0.0, "Merton sigma must be > 0");
        detail::require(gamma < 1.0 && gamma != 0.0, "Merton gamma must be < 1 and nonzero");
        detail::require(T > 0.0, "Merton horizon must be > 0");
    }
    double growth() const { return gamma * mu * mu / (2.0 * sigma * sigma * (1.0 - gamma)); }
};

/// V(t, x) = x^gamma / gamma exp(c (T - t)),  c = gamma mu^2 / (2 sigma^2 (1 - gamma)).
inline double merton_analytic(const MertonParams& p, double t, double x) {
    const double c = p.gamma * p.mu * p.mu / (2.0 * p.sigma * p.sigma * (1.0 - p.gamma));
    return std::pow(x, p.gamma) / p.gamma * std::exp(c * (p.T - t));
}

template <class S>
S merton_residual(const MertonParams& p, const S& v_t, const S& v_x, const S& v_xx) {
    const double k = p.mu * p.mu / (2.0 * p.sigma * p.sigma);
    return v_t * v_xx - S(k) * v_x * v_x;
}

/// Wealth domain [x_lo, x_hi] (x_lo > 0, where the power utility is smooth),
/// with Dirichlet data from the analytic solution on both edges.
inline PDEProblem merton_problem(const MertonParams& p, double x_lo = 0.5, double x_hi = 2.0) {
    p.validate();
    detail::require(x_lo > 0.0 && x_lo < x_hi, "Merton domain needs 0 < x_lo < x_hi");
    PDEProblem prob;
    prob.name = "merton";
    prob.T = p.T;
    prob.z_lo = x_lo;
    prob.z_hi = x_hi;
    prob.residual = [p](double, double, const Dual&, const Dual& f_t, const Dual& f_z, const Dual& f_zz) {
        return merton_residual(p, f_t, f_z, f_zz);
    };
    prob.terminal_value = [p](double x) { return std::pow(x, p.gamma) / p.gamma; };
    prob.lower_boundary = [p, x_lo](double t) { return merton_analytic(p, t, x_lo); };
    prob.upper_boundary = [p, x_hi](double t) { return merton_analytic(p, t, x_hi); };
    prob.normalization = unit_box_map(p.T, x_lo, x_hi);
    return prob;
}

// ---------------------------------------------------------------------------
// Reduced HJB for the pairs weight. With G(t, v, z) = f(t, z) v^gamma,
// D = mu - kappa (z - 1), E = mu + eta^2 - sigma eta rho - kappa (z - 1)
// and s = sigma^2 - 2 sigma eta rho + eta^2:
//
//   s (g-1) f f_t - 1/2 s^2 g z^2 f_z^2 - 1/2 g D^2 f^2
//     + 1/2 s^2 (g-1) z^2 f f_zz - s g D z f f_z + s (g-1) E z f f_z = 0,   f(T, z) = 1.

template <class S>
S cointelation_residual(const CointelationParams& p, double gamma, double z, const S& f, const S& f_t, const S& f_z,
                        const S& f_zz) {
    const double s = p.combined_variance();
    const double drift = p.mu - p.kappa * (z - 1.0);
    const double e = p.mu + p.eta * p.eta - p.sigma * p.eta * p.rho - p.kappa * (z - 1.0);
    const double gm1 = gamma - 1.0;
    return S(s * gm1) * f * f_t - S(0.5 * s * s * gamma * z * z) * f_z * f_z - S(0.5 * gamma * drift * drift) * f * f +
           S(0.5 * s * s * gm1 * z * z) * f * f_zz - S(s * gamma * drift * z) * f * f_z + S(s * gm1 * e * z) * f * f_z;
}

struct ZDomain {
    double z_lo = 0.0;
    double z_hi = 0.0;
    double q_lo = 0.0;  // unpadded quantiles
    double q_hi = 0.0;
};

inline constexpr double kZQuantileLow = 0.005;
inline constexpr double kZQuantileHigh = 0.995;
inline constexpr double kZPadding = 0.10;

namespace detail {

inline double quantile(std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    if (lo + 1 >= v.size()) return a;
    const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    return a + (pos - static_cast<double>(lo)) * (b - a);
}

} // namespace detail

/// [q_0.005, q_0.995] of Z = X / Y over simulated paths, padded 10% of its
/// width on each side (and kept strictly positive).
inline ZDomain simulated_z_domain(const CointelationParams& p, double horizon, int n_paths, std::uint64_t seed,
                                  double dt = kDailyDt) {
    detail::require(n_paths >= 1, "z-domain needs at least one path");
    std::vector<double> z;
    for (int i = 0; i < n_paths; ++i) {
        const PathPair path = simulate_pair(p, horizon, dt, 1, stream_seed(seed, static_cast<std::uint64_t>(i)));
        for (std::size_t k = 0; k < path.x.size(); ++k) z.push_back(path.x[k] / path.y[k]);
    }
    ZDomain d;
    d.q_lo = detail::quantile(z, kZQuantileLow);
    d.q_hi = detail::quantile(z, kZQuantileHigh);
    const double width = std::max(d.q_hi - d.q_lo, 1e-6);
    d.z_lo = std::max(d.q_lo - kZPadding * width, 0.5 * d.q_lo);
    d.z_hi = d.q_hi + kZPadding * width;
    return d;
}

/// How the reduced HJB residual enters the loss. `Raw` is the polynomial form
/// above; it is homogeneous of degree two in f, so the loss can be lowered by
/// shrinking f towards the trivial solution f = 0 away from t = T.
/// `Normalized` divides by f^2, an equivalent equation wherever f != 0.
enum class ResidualForm { Raw, Normalized };

inline const char* to_string(ResidualForm r) { return r == ResidualForm::Raw ? "raw" : "normalized"; }

inline ResidualForm parse_residual_form(const std::string& s) {
    if (s == "raw") return ResidualForm::Raw;
    if (s == "normalized") return ResidualForm::Normalized;
    throw InvalidInput("unknown residual form '" + s + "' (expected raw or normalized)");
}

inline PDEProblem cointelation_pde_problem(const CointelationParams& p, double gamma, double T, const ZDomain& domain,
                                           ResidualForm form = ResidualForm::Normalized) {
    p.validate();
    detail::require(std::isfinite(gamma) && gamma < 1.0 && gamma != 0.0, "gamma must be < 1 and nonzero");
    detail::require(p.combined_variance() > 0.0,
                    "degenerate pair: sigma^2 - 2 sigma eta rho + eta^2 = 0 (rho = 1, sigma = eta)");
    PDEProblem prob;
    prob.name = "cointelation";
    prob.T = T;
    prob.z_lo = domain.z_lo;
    prob.z_hi = domain.z_hi;
    if (form == ResidualForm::Raw) {
        prob.residual = [p, gamma](double, double z, const Dual& f, const Dual& f_t, const Dual& f_z,
                                   const Dual& f_zz) { return cointelation_residual(p, gamma, z, f, f_t, f_z, f_zz); };
    } else {
        prob.residual = [p, gamma](double, double z, const Dual& f, const Dual& f_t, const Dual& f_z,
                                   const Dual& f_zz) {
            return cointelation_residual(p, gamma, z, f, f_t, f_z, f_zz) / (f * f);
        };
    }
    prob.terminal_value = [](double) { return 1.0; };
    prob.boundary_weight = 0.0;
    prob.normalization = unit_box_map(T, domain.z_lo, domain.z_hi);
    prob.validate();
    return prob;
}

inline constexpr double kPiMax = 5.0;
inline constexpr double kMinValueMagnitude = 1e-6;

struct PairWeights {
    double pi1 = 0.0;
    double pi2 = 0.0;
    bool clamped = false;
};

/// pi1 = -z f_z / ((g-1) f) - (mu - kappa (z-1)) / (s (g-1)), clamped to +-pi_max; pi2 = -pi1.
inline PairWeights optimal_pi_from(const EvalResult& e, double z, const CointelationParams& p, double gamma,
                                   double pi_max = kPiMax) {
    if (!(std::abs(e.f) >= kMinValueMagnitude)) {
        throw NumericalFault("value function too close to zero for the optimal weight");
    }
    const double s = p.combined_variance();
    const double gm1 = gamma - 1.0;
    const double drift = p.mu - p.kappa * (z - 1.0);
    double pi1 = -z * e.f_z / (gm1 * e.f) - drift / (s * gm1);
    if (!std::isfinite(pi1)) throw NumericalFault("non-finite optimal weight");
    PairWeights w;
    if (std::abs(pi1) > pi_max) {
        pi1 = std::copysign(pi_max, pi1);
        w.clamped = true;
    }
    w.pi1 = pi1;
    w.pi2 = -pi1;
    return w;
}

inline PairWeights optimal_pi(const DGMNetwork& net, double t, double z, const CointelationParams& p, double gamma,
                              double pi_max = kPiMax) {
    return optimal_pi_from(forward_with_input_derivs(net, t, z), z, p, gamma, pi_max);
}

/// Root-mean-square residual over the given points.
inline double residual_rms(const DGMNetwork& net, const PDEProblem& problem, const Eigen::VectorXd& t,
                           const Eigen::VectorXd& z) {
    const EvalBatch e = forward_with_input_derivs(net, t, z);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double r = problem.residual_value(t(i), z(i), e.at(i));
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(t.size()));
}

} // namespace cointel
