#pragma once

// Cointelation model simulation and diagnostics.
//
//   dX = mu X dt + sigma X dW
//   dY = kappa (X - Y) dt + eta Y dW~,     d<W, W~> = rho dt
//
// X is stepped exactly (log-normal increments); Y uses Euler-Maruyama on a
// sub-grid and is floored away from zero.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cointel/error.hpp"
#include "cointel/rng.hpp"

namespace cointel {

inline constexpr double kTradingDaysPerYear = 252.0;
inline constexpr double kDailyDt = 1.0 / kTradingDaysPerYear;

struct CointelationParams {
    double mu = 0.05;     // drift of the leading asset, per year
    double sigma = 0.17;  // volatility of the leading asset
    double kappa = 0.1;   // mean-reversion speed of the lagging asset
    double eta = 0.16;    // volatility of the lagging asset
    double rho = -0.6;    // correlation of the two Brownian drivers
    double x0 = 1.0;
    double y0 = 1.0;

    /// Throws InvalidInput on non-finite values or out-of-range coefficients.
    /// Zero volatilities are accepted so the noiseless limit stays reachable.
    void validate() const {
        const std::array<double, 7> all{mu, sigma, kappa, eta, rho, x0, y0};
        for (double v : all) detail::require(std::isfinite(v), "cointelation parameters must be finite");
        detail::require(sigma >= 0.0, "sigma must be >= 0");
        detail::require(eta >= 0.0, "eta must be >= 0");
        detail::require(kappa >= 0.0 && kappa <= 1.0, "kappa must lie in [0, 1]");
        detail::require(rho >= -1.0 && rho <= 1.0, "rho must lie in [-1, 1]");
        detail::require(x0 > 0.0 && y0 > 0.0, "initial prices must be > 0");
    }

    /// sigma^2 - 2 sigma eta rho + eta^2: variance rate of the log ratio X/Y.
    double combined_variance() const { return sigma * sigma - 2.0 * sigma * eta * rho + eta * eta; }
};

/// Parameters used in the comparison experiments.
inline CointelationParams example_params() { return CointelationParams{}; }

struct PathPair {
    std::vector<double> times;
    std::vector<double> x;
    std::vector<double> y;
    std::uint64_t seed = 0;
    double dt = kDailyDt;
    int substeps = 1;
    std::size_t floor_events = 0;

    std::size_t size() const { return times.size(); }

    /// Sub-range [first, last] (inclusive) with times re-based to zero.
    PathPair slice(std::size_t first, std::size_t last) const {
        detail::require(first <= last && last < size(), "path slice out of range");
        PathPair out;
        out.seed = seed;
        out.dt = dt;
        out.substeps = substeps;
        for (std::size_t i = first; i <= last; ++i) {
            out.times.push_back(times[i] - times[first]);
            out.x.push_back(x[i]);
            out.y.push_back(y[i]);
        }
        return out;
    }
};

/// Lagging asset is floored at this fraction of y0 after every substep.
inline constexpr double kLaggingFloor = 1e-8;

/// Simulate one joint trajectory recorded every `dt` over `horizon` years.
/// With `antithetic`, every normal draw is negated (same seed), giving the
/// mirror path used for antithetic variance reduction.
inline PathPair simulate_pair(const CointelationParams& p, double horizon, double dt, int substeps,
                              std::uint64_t seed, bool antithetic = false) {
    p.validate();
    detail::require(std::isfinite(horizon) && horizon > 0.0, "horizon must be > 0");
    detail::require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
    detail::require(substeps >= 1, "substeps must be >= 1");

    const auto n_steps = static_cast<std::size_t>(std::llround(horizon / dt));
    detail::require(n_steps >= 1, "horizon shorter than one step");

    PathPair path;
    path.seed = seed;
    path.dt = dt;
    path.substeps = substeps;
    path.times.resize(n_steps + 1);
    path.x.resize(n_steps + 1);
    path.y.resize(n_steps + 1);

    const double h = dt / substeps;
    const double sqrt_h = std::sqrt(h);
    const double log_drift = (p.mu - 0.5 * p.sigma * p.sigma) * h;
    const double rho_perp = std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho));
    const double y_floor = kLaggingFloor * p.y0;
    const double sign = antithetic ? -1.0 : 1.0;

    Rng rng(seed);
    double x = p.x0;
    double y = p.y0;
    path.times[0] = 0.0;
    path.x[0] = x;
    path.y[0] = y;

    for (std::size_t k = 1; k <= n_steps; ++k) {
        for (int s = 0; s < substeps; ++s) {
            const double z1 = sign * rng.normal();
            const double z2 = sign * rng.normal();
            const double dw = sqrt_h * z1;
            const double dw_lag = sqrt_h * (p.rho * z1 + rho_perp * z2);
            const double y_next = y + p.kappa * (x - y) * h + p.eta * y * dw_lag;
            x *= std::exp(log_drift + p.sigma * dw);
            y = y_next;
            if (y < y_floor) {
                y = y_floor;
                ++path.floor_events;
            }
        }
        if (!(std::isfinite(x) && x > 0.0 && std::isfinite(y))) {
            throw NumericalFault("simulation fault at step " + std::to_string(k) +
                                 ": price left the representable positive range");
        }
        path.times[k] = static_cast<double>(k) * dt;
        path.x[k] = x;
        path.y[k] = y;
    }
    return path;
}

// ---------------------------------------------------------------------------
// Generalized bumping SDE: dP = theta (mu - P) dt + sigma P^alpha (1 - P^2)^beta dW

struct GeneralizedSDEParams {
    double theta = 0.0;
    double mu_level = 0.0;
    double sigma = 0.1;
    double alpha = 1.0;
    double beta = 0.0;
    double p0 = 1.0;

    void validate() const {
        const std::array<double, 6> all{theta, mu_level, sigma, alpha, beta, p0};
        for (double v : all) detail::require(std::isfinite(v), "generalized SDE parameters must be finite");
        detail::require(sigma >= 0.0, "sigma must be >= 0");
    }
};

struct GeneralizedPath {
    std::vector<double> times;
    std::vector<double> values;
    std::size_t clamp_events = 0;  // diffusion evaluated on a clamped state
};

namespace detail {

inline bool is_integer(double v) { return std::floor(v) == v; }

// State-dependent diffusion factor P^alpha (1 - P^2)^beta with the clamping
// rule: fractional powers see max(P, 0); a nonzero beta sees P clamped to [-1, 1].
inline double bumping_diffusion(const GeneralizedSDEParams& p, double state, bool& clamped) {
    double level = 1.0;
    if (p.alpha != 0.0) {
        if (is_integer(p.alpha)) {
            level = std::pow(state, p.alpha);
        } else {
            if (state < 0.0) clamped = true;
            level = std::pow(std::max(state, 0.0), p.alpha);
        }
    }
    double band = 1.0;
    if (p.beta != 0.0) {
        if (std::abs(state) > 1.0) clamped = true;
        const double c = std::clamp(state, -1.0, 1.0);
        band = std::pow(1.0 - c * c, p.beta);
    }
    return level * band;
}

} // namespace detail

inline GeneralizedPath simulate_generalized(const GeneralizedSDEParams& p, double horizon, double dt,
                                            std::uint64_t seed) {
    p.validate();
    detail::require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
    detail::require(std::isfinite(horizon) && horizon > 0.0, "horizon must be > 0");
    const auto n_steps = static_cast<std::size_t>(std::llround(horizon / dt));
    detail::require(n_steps >= 1, "horizon shorter than one step");

    GeneralizedPath out;
    out.times.resize(n_steps + 1);
    out.values.resize(n_steps + 1);
    Rng rng(seed);
    const double sqrt_dt = std::sqrt(dt);
    double state = p.p0;
    out.values[0] = state;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        bool clamped = false;
        const double diffusion = p.sigma == 0.0 ? 0.0 : p.sigma * detail::bumping_diffusion(p, state, clamped);
        if (clamped) ++out.clamp_events;
        state += p.theta * (p.mu_level - state) * dt + diffusion * sqrt_dt * rng.normal();
        if (!std::isfinite(state)) {
            throw NumericalFault("generalized SDE produced a non-finite value at step " + std::to_string(k));
        }
        out.times[k] = static_cast<double>(k) * dt;
        out.values[k] = state;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Returns and correlation diagnostics

/// r_i = ln(p[i + step] / p[i]).
inline std::vector<double> log_returns(std::span<const double> prices, std::size_t step) {
    detail::require(step >= 1, "return step must be >= 1");
    if (step >= prices.size()) throw InvalidInput("return step leaves no returns (step >= series length)");
    for (double v : prices) detail::require(std::isfinite(v) && v > 0.0, "prices must be finite and > 0");
    std::vector<double> out(prices.size() - step);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(prices[i + step] / prices[i]);
    return out;
}

/// Overlapping simple returns (p[i + step] - p[i]) / p[i].
inline std::vector<double> simple_returns(std::span<const double> prices, std::size_t step) {
    detail::require(step >= 1 && step < prices.size(), "return step out of range");
    std::vector<double> out(prices.size() - step);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (prices[i + step] - prices[i]) / prices[i];
    return out;
}

/// Sample Pearson correlation of the overlapping `delta_t`-step simple returns.
/// The 1/(delta_t (N-1)) normalizations of the volatilities and covariance
/// cancel in the ratio.
inline double measured_correlation(std::span<const double> x, std::span<const double> y, std::size_t delta_t) {
    detail::require(x.size() == y.size(), "series must have equal length");
    detail::require(delta_t >= 1, "delta_t must be >= 1");
    detail::require(x.size() >= delta_t + 2, "series too short for the requested delta_t");
    const auto rx = simple_returns(x, delta_t);
    const auto ry = simple_returns(y, delta_t);
    const double n = static_cast<double>(rx.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) throw NumericalFault("undefined correlation: zero sample variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// sup over d = 1..delta_t of measured_correlation(x, y, d). Lags whose
/// correlation is undefined are skipped.
inline double inferred_correlation_empirical(std::span<const double> x, std::span<const double> y,
                                             std::size_t delta_t) {
    detail::require(delta_t >= 1, "delta_t must be >= 1");
    std::optional<double> best;
    for (std::size_t d = 1; d <= delta_t; ++d) {
        try {
            const double c = measured_correlation(x, y, d);
            if (!best || c > *best) best = c;
        } catch (const NumericalFault&) {
        }
    }
    if (!best) throw NumericalFault("undefined correlation at every lag up to delta_t");
    return *best;
}

inline constexpr double kDefaultInferredLambda = 1.75;

/// rho + (1 - rho) [1 - exp(-lambda kappa (delta_t - 1))].
inline double inferred_correlation_approx(double rho, double kappa, double lambda_ic, double delta_t) {
    detail::require(rho >= -1.0 && rho <= 1.0, "rho must lie in [-1, 1]");
    detail::require(kappa >= 0.0 && kappa <= 1.0, "kappa must lie in [0, 1]");
    detail::require(lambda_ic > 0.0, "lambda must be > 0");
    detail::require(delta_t >= 1.0, "delta_t must be >= 1");
    return rho + (1.0 - rho) * (1.0 - std::exp(-lambda_ic * kappa * (delta_t - 1.0)));
}

/// N [gamma (1 - kappa) + sqrt(kappa) / 2].
inline double expected_crosses(double kappa, double n, double gamma_c) {
    detail::require(n >= 1.0, "N must be >= 1");
    detail::require(gamma_c > 0.0, "gamma must be > 0");
    detail::require(kappa >= 0.0 && kappa <= 1.0, "kappa must lie in [0, 1]");
    return n * (gamma_c * (1.0 - kappa) + 0.5 * std::sqrt(kappa));
}

/// Sign changes of x - y. A zero spread inherits the previous sign, so
/// touching without passing through is not a crossing.
inline std::size_t count_crosses(std::span<const double> x, std::span<const double> y) {
    detail::require(x.size() == y.size(), "series must have equal length");
    int prev = 0;
    std::size_t crosses = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = x[i] - y[i];
        const int sign = s > 0.0 ? 1 : (s < 0.0 ? -1 : prev);
        if (prev != 0 && sign != prev) ++crosses;
        prev = sign;
    }
    return crosses;
}

/// Crossings of the series after each is divided by its first value.
inline std::size_t count_crosses_normalized(std::span<const double> x, std::span<const double> y) {
    detail::require(x.size() == y.size() && !x.empty(), "series must have equal, non-zero length");
    detail::require(x[0] != 0.0 && y[0] != 0.0, "normalization needs non-zero first values");
    std::vector<double> xn(x.size()), yn(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xn[i] = x[i] / x[0];
        yn[i] = y[i] / y[0];
    }
    return count_crosses(xn, yn);
}

/// Observed crossing count of one path of length N under mean-reversion
/// speed kappa; input to the least-squares fit of the crossing constant.
struct CrossingSample {
    double kappa = 0.0;
    double n = 0.0;
    double observed = 0.0;
};

/// Least-squares gamma minimizing sum (obs - N[gamma (1-kappa) + sqrt(kappa)/2])^2.
/// With kappa = 0 controls this is mean(obs) / N.
inline double fit_crossing_gamma(std::span<const CrossingSample> samples) {
    double num = 0.0, den = 0.0;
    for (const auto& s : samples) {
        const double a = s.n * (1.0 - s.kappa);
        num += a * (s.observed - 0.5 * s.n * std::sqrt(s.kappa));
        den += a * a;
    }
    if (den <= 0.0) throw NumericalFault("crossing fit needs at least one sample with kappa < 1");
    const double gamma = num / den;
    if (!(gamma > 0.0)) throw NumericalFault("fitted crossing constant is not positive");
    return gamma;
}

enum class Zone { Rho, Kappa };

struct ZoneReport {
    double b_plus = 0.0;
    double b_minus = 0.0;
    std::vector<Zone> zone_labels;

    std::size_t count(Zone z) const {
        return static_cast<std::size_t>(std::count(zone_labels.begin(), zone_labels.end(), z));
    }
};

/// B+ = |max spread| / 2, B- = |min spread| / 2; a step is in Z_rho when
/// B+ > |X - Y| > B-, otherwise in Z_kappa.
inline ZoneReport estimation_zones(std::span<const double> x, std::span<const double> y) {
    detail::require(x.size() == y.size(), "series must have equal length");
    detail::require(x.size() >= 2, "need at least two observations");
    double hi = x[0] - y[0], lo = hi;
    for (std::size_t i = 1; i < x.size(); ++i) {
        hi = std::max(hi, x[i] - y[i]);
        lo = std::min(lo, x[i] - y[i]);
    }
    ZoneReport r;
    r.b_plus = std::abs(hi / 2.0);
    r.b_minus = std::abs(lo / 2.0);
    r.zone_labels.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::abs(x[i] - y[i]);
        r.zone_labels.push_back(r.b_plus > a && a > r.b_minus ? Zone::Rho : Zone::Kappa);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Cointelation test

inline constexpr std::array<std::size_t, 4> kCointelationLags{1, 5, 22, 252};
inline constexpr double kInferredCorrelationTolerance = 0.15;
inline constexpr double kCrossingTolerance = 0.15;

enum class Verdict { Pass, Fail, NotApplicable };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::NotApplicable: return "not-applicable";
    }
    return "?";
}

struct LagCheck {
    std::size_t delta_t = 0;
    double empirical = 0.0;
    double approximate = 0.0;
    bool pass = false;
};

struct CointelationReport {
    std::vector<LagCheck> lags;
    std::size_t observed_crosses = 0;             // raw spread; used for the verdict
    std::size_t observed_crosses_normalized = 0;  // both series divided by their first value
    double expected_crosses = 0.0;
    bool crossing_pass = false;
    bool correlation_pass = false;
    Verdict verdict = Verdict::NotApplicable;
    std::string note;
};

/// Hypothesized model coefficients the data are tested against. `kappa` is
/// the mean-reversion speed per observation step.
struct CointelationHypothesis {
    double rho = -0.6;
    double kappa = 0.1;
    double lambda_ic = kDefaultInferredLambda;
    double gamma_c = 0.02;
};

inline CointelationReport cointelation_test(std::span<const double> x, std::span<const double> y,
                                            const CointelationHypothesis& h) {
    detail::require(x.size() == y.size(), "series must have equal length");
    if (x.size() < 2 * kCointelationLags.back()) {
        throw InvalidInput("cointelation test needs at least " + std::to_string(2 * kCointelationLags.back()) +
                           " observations, got " + std::to_string(x.size()));
    }
    CointelationReport r;
    bool zero_spread = true;
    for (std::size_t i = 0; i < x.size(); ++i) zero_spread = zero_spread && x[i] == y[i];
    if (zero_spread) {
        r.note = "identical series: zero spread, test not applicable";
        return r;
    }
    r.correlation_pass = true;
    try {
        for (std::size_t lag : kCointelationLags) {
            LagCheck c;
            c.delta_t = lag;
            c.empirical = inferred_correlation_empirical(x, y, lag);
            c.approximate = inferred_correlation_approx(h.rho, h.kappa, h.lambda_ic, static_cast<double>(lag));
            c.pass = std::abs(c.empirical - c.approximate) <= kInferredCorrelationTolerance;
            r.correlation_pass = r.correlation_pass && c.pass;
            r.lags.push_back(c);
        }
    } catch (const NumericalFault& e) {
        r.lags.clear();
        r.correlation_pass = false;
        r.note = std::string("degenerate returns: ") + e.what();
        return r;
    }
    r.observed_crosses = count_crosses(x, y);
    r.observed_crosses_normalized = count_crosses_normalized(x, y);
    r.expected_crosses = expected_crosses(h.kappa, static_cast<double>(x.size()), h.gamma_c);
    r.crossing_pass = std::abs(static_cast<double>(r.observed_crosses) - r.expected_crosses) <=
                      kCrossingTolerance * r.expected_crosses;
    r.verdict = r.correlation_pass && r.crossing_pass ? Verdict::Pass : Verdict::Fail;
    r.note = "crossings counted on the raw spread";
    return r;
}

} // namespace cointel
