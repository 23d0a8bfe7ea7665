#pragma once

// Infinite-width signal propagation through random dropout networks:
// the length map q, the correlation map c, their fixed points, the slope
// quantities chi1 / chi2 and the depth scales xi = |1 / ln chi|.

#include "mfdl/activations.hpp"
#include "mfdl/quadrature.hpp"

#include <limits>

namespace mfdl {

struct MeanFieldParams {
    double sigma_w_sq = 1.0;  // weight variance (times N)
    double sigma_b_sq = 0.0;  // bias variance
    double rho = 1.0;         // dropout keep rate in (0, 1]

    /// Throws InvalidArgument unless sigma_w_sq > 0, sigma_b_sq >= 0 and rho in (0, 1].
    /// sigma_w_sq == 0 is accepted when allow_zero_weights is set (degenerate maps).
    void validate(bool allow_zero_weights = true) const;
};

struct LengthState {
    double q_aa = 1.0;
    double q_bb = 1.0;
    double c_ab = 0.0;
    int layer = 0;
};

struct DepthScales {
    double q_star = 0.0;
    double c_star = 1.0;
    double chi1 = 0.0;
    double chi2 = 0.0;
    double xi1 = 0.0;  // +inf when chi1 == 1
    double xi2 = 0.0;
};

struct FixedPointResult {
    double value = 0.0;
    int iterations = 0;
};

struct SolverOptions {
    double tol = 1e-12;
    int max_iter = 10000;
};

// Correlations are clamped to this distance from +-1 before sqrt(1 - c^2).
inline constexpr double kCorrelationClamp = 1e-12;
// |chi - 1| below this maps to an infinite depth scale.
inline constexpr double kUnitChiTolerance = 1e-12;

/// One application of the length map:
///   q' = sigma_w^2 / rho * E[phi(sqrt(q) z)^2] + sigma_b^2.
double q_step(double q, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule);

/// Iterates q_step from q0 until |q_step(q) - q| < tol. Throws ConvergenceError
/// (with the last iterate) when the map diverges or max_iter is exhausted.
FixedPointResult q_fixed_point(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule,
                               double q0 = 1.0, SolverOptions opts = {});

/// Cross-moment map q_ab' = sigma_w^2 E[phi(u1) phi(u2)] + sigma_b^2. Masks of
/// the two inputs are independent, so no 1/rho appears here.
double q_ab_step(const LengthState& s, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule);

/// Advances q_aa, q_bb and the correlation by one layer.
LengthState c_step(const LengthState& s, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule);

/// Drives the lengths to q* and then iterates the correlation map from c0.
/// For Linear/ReLU whose lengths diverge, iterates the scale-free limit map
/// (sigma_b^2 dropped) instead.
FixedPointResult c_fixed_point(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule,
                               double c0 = 0.9, SolverOptions opts = {});

/// sigma_w^2 / rho * E[phi'(sqrt(q*) z)^2].
double chi1(double q_star, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule);

/// sigma_w^2 * E[phi'(u1*) phi'(u2*)] with both lengths at q* and correlation c*.
double chi2(double q_star, double c_star, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule);

/// |1 / ln chi|, +inf when chi is 1 within kUnitChiTolerance.
double depth_scale(double chi);

DepthScales depth_scales(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule,
                         SolverOptions opts = {});

/// Iterates the correlation map for `layers` steps at q* and fits
/// ln|c^l - c*| against l, skipping the first 20% of layers and points below
/// 1e-12. Returns -1 / slope. Throws ConvergenceError when the trajectory does
/// not decay exponentially.
double c_convergence_rate(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule, double c0,
                          int layers, SolverOptions opts = {});

/// E[f(sqrt(q) z)] for an integrand built from the activation (kink-aware panels).
template <class F>
double activation_average(F&& f, double q, ActivationKind a, const QuadratureRule& rule) {
    return expect_affine(f, 0.0, std::sqrt(q), breakpoints(a), rule);
}

}  // namespace mfdl
