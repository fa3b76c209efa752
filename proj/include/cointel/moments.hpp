#pragma once

// Closed-form one-step conditional moments of the cointelation model and the
// log-return statistics built from them, plus a Monte Carlo oracle.
//
// Conditioning on (X, Y) = (x, y) at the start of a step of length dt:
//
//   E[Y]   = a e^{mu dt} + (y - a) e^{-kappa dt},             a = kappa x / (mu + kappa)
//   E[XY]  = b e^{(2mu+s^2) dt} + (xy - b) e^{(mu-kappa+s eta rho) dt},
//                                                             b = kappa x^2 / (mu + s^2 + kappa - s eta rho)
//   E[Y^2] = c e^{(2mu+s^2) dt} + d e^{(mu-kappa+s eta rho) dt} + (y^2 - c - d) e^{(eta^2 - 2kappa) dt}
//            c = 2 kappa b / (2mu + s^2 - eta^2 + 2kappa)
//            d = 2 kappa (xy - b) / (mu - kappa + s eta rho - eta^2 + 2kappa)
//
// (s = sigma). The Y^2 growth rate eta^2 - 2 kappa comes from Ito's lemma on
// Y^2; log-return moments use second-order Taylor expansions of ln Y.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cointel/error.hpp"
#include "cointel/rng.hpp"
#include "cointel/sim.hpp"

namespace cointel {

struct RawMoments {
    double mean_y = 0.0;
    double mean_xy = 0.0;
    double mean_y2 = 0.0;
    double mean_x = 0.0;
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

struct MomentSet {
    double e_rx = 0.0, e_ry = 0.0;
    double var_rx = 0.0, var_ry = 0.0;
    double cov_rxy = 0.0;
    double mean_y = 0.0, mean_xy = 0.0, mean_y2 = 0.0;
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    double dt = 0.0;
    double x_prev = 0.0, y_prev = 0.0;
    /// Set when the Taylor approximation left the admissible region
    /// (var_ry <= 0, or |cov| above the Cauchy-Schwarz bound).
    bool flagged = false;
    std::string flag_reason;
};

inline constexpr double kCovarianceBoundTolerance = 1e-9;

namespace detail {

inline double checked_denominator(double value, const char* combination) {
    if (std::abs(value) < 1e-14) {
        throw NumericalFault(std::string("degenerate parameters: ") + combination + " = 0");
    }
    return value;
}

} // namespace detail

inline RawMoments raw_moments(const CointelationParams& p, double x_prev, double y_prev, double dt) {
    p.validate();
    detail::require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
    detail::require(std::isfinite(x_prev) && x_prev > 0.0 && std::isfinite(y_prev) && y_prev > 0.0,
                    "conditioning prices must be finite and > 0");

    const double mu = p.mu, s = p.sigma, k = p.kappa, eta = p.eta, rho = p.rho;
    const double ser = s * eta * rho;
    const double xy = x_prev * y_prev;

    const double den_a = detail::checked_denominator(mu + k, "mu + kappa");
    const double den_b = detail::checked_denominator(mu + s * s + k - ser, "mu + sigma^2 + kappa - sigma eta rho");
    const double den_c =
        detail::checked_denominator(2.0 * mu + s * s - eta * eta + 2.0 * k, "2mu + sigma^2 - eta^2 + 2kappa");
    const double den_d =
        detail::checked_denominator(mu + k + ser - eta * eta, "mu + kappa + sigma eta rho - eta^2");

    RawMoments m;
    m.a = k * x_prev / den_a;
    m.b = k * x_prev * x_prev / den_b;
    m.c = 2.0 * k * m.b / den_c;
    m.d = 2.0 * k * (xy - m.b) / den_d;

    const double e_mu = std::exp(mu * dt);
    const double e_kappa = std::exp(-k * dt);
    const double e_x2 = std::exp((2.0 * mu + s * s) * dt);
    const double e_xy = std::exp((mu - k + ser) * dt);
    const double e_y2 = std::exp((eta * eta - 2.0 * k) * dt);

    m.mean_x = x_prev * e_mu;
    m.mean_y = m.a * e_mu + (y_prev - m.a) * e_kappa;
    m.mean_xy = m.b * e_x2 + (xy - m.b) * e_xy;
    m.mean_y2 = m.c * e_x2 + m.d * e_xy + (y_prev * y_prev - m.c - m.d) * e_y2;
    return m;
}

inline MomentSet return_moments(const CointelationParams& p, double x_prev, double y_prev, double dt) {
    const RawMoments r = raw_moments(p, x_prev, y_prev, dt);
    MomentSet m;
    m.dt = dt;
    m.x_prev = x_prev;
    m.y_prev = y_prev;
    m.mean_y = r.mean_y;
    m.mean_xy = r.mean_xy;
    m.mean_y2 = r.mean_y2;
    m.a = r.a;
    m.b = r.b;
    m.c = r.c;
    m.d = r.d;

    m.e_rx = (p.mu - 0.5 * p.sigma * p.sigma) * dt;
    m.var_rx = p.sigma * p.sigma * dt;

    if (!(r.mean_y > 0.0) || !(r.mean_x * r.mean_y > 0.0) || !(r.mean_xy > 0.0)) {
        throw NumericalFault("non-positive conditional moment; log-return expansion undefined");
    }
    const double ey2 = r.mean_y * r.mean_y;
    // E ln Y ~ ln E[Y] - Var[Y] / (2 E[Y]^2) = ln E[Y] - E[Y^2] / (2 E[Y]^2) + 1/2
    m.e_ry = std::log(r.mean_y) - r.mean_y2 / (2.0 * ey2) + 0.5 - std::log(y_prev);
    m.var_ry = r.mean_y2 / ey2 - 1.0;
    m.cov_rxy = std::log(r.mean_xy / (r.mean_x * r.mean_y));

    if (!(m.var_ry > 0.0)) {
        m.flagged = true;
        m.flag_reason = "non-positive Taylor variance of the lagging log return";
    } else if (std::abs(m.cov_rxy) > std::sqrt(m.var_rx * m.var_ry) + kCovarianceBoundTolerance) {
        m.flagged = true;
        m.flag_reason = "covariance exceeds the Cauchy-Schwarz bound";
    }
    return m;
}

/// Empirical moments with standard errors.
struct MomentEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

struct EmpiricalMoments {
    MomentEstimate mean_y, mean_xy, mean_y2;
    MomentEstimate e_rx, e_ry;
    double var_rx = 0.0, var_ry = 0.0, cov_rxy = 0.0;
    std::size_t n_paths = 0;
    bool antithetic = false;
};

inline constexpr int kOracleSubsteps = 8;

namespace detail {

// Running sums for mean and standard error over i.i.d. samples.
struct Accumulator {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    MomentEstimate estimate() const {
        const double nn = static_cast<double>(n);
        const double mean = sum / nn;
        const double var = n > 1 ? std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0)) : 0.0;
        return {mean, std::sqrt(var / nn)};
    }
};

} // namespace detail

/// Fine-substep Monte Carlo estimate of the one-step moments. Each path is
/// an independent `simulate_pair` run seeded by stream_seed(seed, i). With
/// `antithetic`, paths come in mirrored pairs and standard errors are computed
/// from pair averages (n_paths counts individual paths).
inline EmpiricalMoments mc_moment_oracle(const CointelationParams& p, double x_prev, double y_prev, double dt,
                                         std::size_t n_paths, std::uint64_t seed, bool antithetic = false,
                                         int substeps = kOracleSubsteps) {
    detail::require(n_paths >= 1000, "oracle needs at least 1000 paths");
    CointelationParams start = p;
    start.x0 = x_prev;
    start.y0 = y_prev;

    detail::Accumulator ay, axy, ay2, arx, ary;
    // Second moments of the log returns, centered after the pass.
    double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    const std::size_t groups = antithetic ? n_paths / 2 : n_paths;
    const int per_group = antithetic ? 2 : 1;

    for (std::size_t g = 0; g < groups; ++g) {
        double gy = 0.0, gxy = 0.0, gy2 = 0.0, grx = 0.0, gry = 0.0;
        for (int m = 0; m < per_group; ++m) {
            const PathPair path = simulate_pair(start, dt, dt, substeps, stream_seed(seed, g), m == 1);
            const double x1 = path.x.back();
            const double y1 = path.y.back();
            const double rx = std::log(x1 / x_prev);
            const double ry = std::log(y1 / y_prev);
            gy += y1;
            gxy += x1 * y1;
            gy2 += y1 * y1;
            grx += rx;
            gry += ry;
            sx += rx;
            sy += ry;
            sxx += rx * rx;
            syy += ry * ry;
            sxy += rx * ry;
        }
        const double inv = 1.0 / per_group;
        ay.add(gy * inv);
        axy.add(gxy * inv);
        ay2.add(gy2 * inv);
        arx.add(grx * inv);
        ary.add(gry * inv);
    }

    EmpiricalMoments out;
    out.n_paths = groups * static_cast<std::size_t>(per_group);
    out.antithetic = antithetic;
    out.mean_y = ay.estimate();
    out.mean_xy = axy.estimate();
    out.mean_y2 = ay2.estimate();
    out.e_rx = arx.estimate();
    out.e_ry = ary.estimate();
    const double n = static_cast<double>(out.n_paths);
    const double mx = sx / n, my = sy / n;
    out.var_rx = (sxx - n * mx * mx) / (n - 1.0);
    out.var_ry = (syy - n * my * my) / (n - 1.0);
    out.cov_rxy = (sxy - n * mx * my) / (n - 1.0);
    return out;
}

/// MomentSet assembled from the oracle; the fallback when the closed-form
/// expansion is flagged.
inline MomentSet moments_from_oracle(const EmpiricalMoments& e, double x_prev, double y_prev, double dt) {
    MomentSet m;
    m.dt = dt;
    m.x_prev = x_prev;
    m.y_prev = y_prev;
    m.e_rx = e.e_rx.value;
    m.e_ry = e.e_ry.value;
    m.var_rx = e.var_rx;
    m.var_ry = e.var_ry;
    m.cov_rxy = e.cov_rxy;
    m.mean_y = e.mean_y.value;
    m.mean_xy = e.mean_xy.value;
    m.mean_y2 = e.mean_y2.value;
    m.flagged = !(m.var_ry > 0.0 && m.var_rx > 0.0);
    if (m.flagged) m.flag_reason = "degenerate Monte Carlo variance";
    return m;
}

} // namespace cointel
