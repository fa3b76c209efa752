#pragma once

// Two-asset mean-variance criterion: utility 2 tau h'M - h'Sigma h on the
// long-only simplex, with the closed-form optimum
//
//   h* = Sigma^-1 e / (e' Sigma^-1 e)
//        + tau [Sigma^-1 M - (e' Sigma^-1 M) / (e' Sigma^-1 e) Sigma^-1 e],   e = (1, 1)
//
// projected onto {h >= 0, h1 + h2 = 1} when it leaves the simplex.

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "cointel/error.hpp"
#include "cointel/moments.hpp"

namespace cointel {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct MVCWeights {
    double h1 = 0.5;
    double h2 = 0.5;
    bool clipped = false;
};

inline constexpr double kDefaultRiskTolerance = 0.5;
inline constexpr double kMaxConditionNumber = 1e12;

inline Vec2 mean_vector(const MomentSet& m) { return {m.e_rx, m.e_ry}; }

inline Mat2 covariance_matrix(const MomentSet& m) {
    if (m.flagged) {
        throw NumericalFault("flagged moment set (" + m.flag_reason + "); use Monte Carlo moments instead");
    }
    Mat2 s;
    s << m.var_rx, m.cov_rxy, m.cov_rxy, m.var_ry;
    return s;
}

/// Euclidean projection of a point with h1 + h2 = 1 onto the 2-simplex.
inline MVCWeights project_to_simplex(double h1, double h2) {
    // Closest point on the segment {(s, 1 - s): 0 <= s <= 1}.
    const double s = std::clamp(0.5 * (h1 - h2 + 1.0), 0.0, 1.0);
    MVCWeights w;
    w.h1 = s;
    w.h2 = 1.0 - s;
    w.clipped = h1 < 0.0 || h2 < 0.0;
    return w;
}

inline MVCWeights mvc_weights(const Vec2& mean, const Mat2& cov, double tau) {
    detail::require(std::isfinite(tau) && tau >= 0.0, "risk tolerance must be >= 0");
    detail::require(mean.allFinite() && cov.allFinite(), "mean and covariance must be finite");
    detail::require(std::abs(cov(0, 1) - cov(1, 0)) <= 1e-12 * (std::abs(cov(0, 1)) + 1e-300),
                    "covariance must be symmetric");

    const Eigen::SelfAdjointEigenSolver<Mat2> eig(cov, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues()(0);
    const double hi = eig.eigenvalues()(1);
    if (!(lo > 0.0) || hi / lo >= kMaxConditionNumber) {
        throw NumericalFault("singular covariance matrix (condition number >= 1e12)");
    }

    const Mat2 inv = cov.inverse();
    const Vec2 e = Vec2::Ones();
    const Vec2 inv_e = inv * e;
    const Vec2 inv_m = inv * mean;
    const double e_inv_e = e.dot(inv_e);
    const double e_inv_m = e.dot(inv_m);
    const Vec2 h = inv_e / e_inv_e + tau * (inv_m - (e_inv_m / e_inv_e) * inv_e);

    if (h(0) >= 0.0 && h(1) >= 0.0) return {h(0), h(1), false};
    return project_to_simplex(h(0), h(1));
}

inline MVCWeights mvc_weights(const MomentSet& m, double tau) {
    return mvc_weights(mean_vector(m), covariance_matrix(m), tau);
}

/// 2 tau h'M - h'Sigma h.
inline double mvc_utility(const Vec2& h, const Vec2& mean, const Mat2& cov, double tau) {
    return 2.0 * tau * h.dot(mean) - h.dot(cov * h);
}

inline double mvc_utility(const MVCWeights& w, const Vec2& mean, const Mat2& cov, double tau) {
    return mvc_utility(Vec2(w.h1, w.h2), mean, cov, tau);
}

} // namespace cointel
