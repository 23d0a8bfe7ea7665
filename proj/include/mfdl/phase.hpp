#pragma once

// Depth-scale curves over sigma_w^2 and the trainable-length bound
// L <= min(12 xi1, 12 xi2).

#include "mfdl/meanfield.hpp"

#include <span>
#include <string>
#include <vector>

namespace mfdl {

inline constexpr double kTrainableMultiplier = 12.0;
inline constexpr double kBaselineMultiplier = 6.0;

struct PhaseCurve {
    std::vector<double> sigma_w_sq;
    std::vector<double> q_star;
    std::vector<double> c_star;
    std::vector<double> chi1;
    std::vector<double> chi2;
    std::vector<double> xi1;
    std::vector<double> xi2;
    std::vector<double> b12xi1;           // multiplier * xi1
    std::vector<double> b6xi2;            // baseline multiplier * xi2
    std::vector<double> b12xi2;           // multiplier * xi2
    std::vector<double> trainable_bound;  // min(b12xi1, b12xi2)
    std::vector<char> converged;
    std::vector<std::string> diagnostic;  // empty when converged

    std::size_t size() const { return sigma_w_sq.size(); }
};

/// `points` values log-spaced over [lo, hi], both ends included.
std::vector<double> log_grid(double lo, double hi, int points);
std::vector<double> linear_grid(double lo, double hi, int points);

/// Solves the depth scales at each sigma_w^2 (base supplies sigma_b^2, rho).
/// Points whose fixed points fail are flagged and carry NaN values.
PhaseCurve depth_scale_grid(std::span<const double> grid, const MeanFieldParams& base, ActivationKind a,
                            const QuadratureRule& rule, double multiplier = kTrainableMultiplier,
                            double baseline_multiplier = kBaselineMultiplier);

/// chi1 at p with q* re-solved (not needed for Linear/ReLU, whose chi1 is
/// scale free).
double chi1_at(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule);

/// Bisection root of chi1(sigma_w^2) = target inside [lo, hi] to `tol` in
/// sigma_w^2. Throws InvalidArgument when the bracket does not straddle it.
double chi1_level(const MeanFieldParams& base, ActivationKind a, const QuadratureRule& rule, double target,
                  double lo, double hi, double tol = 1e-10);

/// chi1_level at target 1.
double critical_line(const MeanFieldParams& base, ActivationKind a, const QuadratureRule& rule, double lo,
                     double hi, double tol = 1e-10);

/// min(multiplier xi1, multiplier xi2); +inf when both scales are infinite.
double trainable_length(const DepthScales& d, double multiplier = kTrainableMultiplier);
double trainable_length(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule,
                        double multiplier = kTrainableMultiplier);

}  // namespace mfdl
