#pragma once

// Variance-versus-mean power laws of the per-layer gradient metrics.

#include "mfdl/ensemble.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfdl {

struct PowerLawFit {
    double exponent = 0.0;       // slope of ln V against ln m
    double log_intercept = 0.0;  // ln V at m = 1
    double r_squared = 0.0;
    int n_points = 0;
};

/// Ordinary least squares of ln V on ln m. Needs >= 3 strictly positive pairs
/// and some spread in m.
PowerLawFit fit_power_law(std::span<const double> means, std::span<const double> variances);

struct LogSlopeFit {
    double slope = 0.0;  // d ln v / d l
    double intercept = 0.0;
    double r_squared = 0.0;
    int n_points = 0;
    int first_layer = 0;
    int last_layer = 0;
};

/// Least-squares slope of ln(values[l-1]) against l over layers
/// ceil(lo * L) .. floor(hi * L). Non-positive values are skipped.
LogSlopeFit fit_log_slope(std::span<const double> per_layer, double lo, double hi);

struct UniversalityConfig {
    ActivationKind activation = ActivationKind::Tanh;
    double rho = 1.0;
    int width = 500;
    // Defaults to default_universality_sigma_w_sq(activation, rho, ...).
    std::optional<double> sigma_w_sq;
};

// chi1 of the default weight variance.
inline constexpr double kUniversalityChi1 = 0.5;

/// Weight variance used when a sweep row does not set one: the sigma_w^2 with
/// chi1 = 1/2, so every row decays at the same rate and the means span many
/// decades. Closed form for Linear (rho / 2) and ReLU (rho); bisection otherwise.
double default_universality_sigma_w_sq(ActivationKind a, double rho, double sigma_b_sq, const QuadratureRule& rule);

// Layers below this mean are treated as underflowed and left out of the fit.
inline constexpr double kUnderflowFloor = 1e-300;

struct UniversalityOptions {
    EnsembleOptions ensemble;
    // Fit window as fractions of the depth.
    double window_lo = 0.1;
    double window_hi = 0.95;
};

struct UniversalityRow {
    UniversalityConfig config;
    double sigma_w_sq = 0.0;
    Metric metric = Metric::GAA;
    PowerLawFit fit;
    int n_excluded = 0;
    // Window layers (1-based) with their ensemble mean and variance.
    std::vector<int> layers;
    std::vector<double> means;
    std::vector<double> variances;
    // Non-empty when the simulation or the fit failed for this row.
    std::string error;
};

/// One ensemble per config (depth, sigma_b^2 and seed from `base`), then one
/// fit per gradient metric. A failing config yields rows with `error` set and
/// does not stop the others.
std::vector<UniversalityRow> universality_report(std::span<const UniversalityConfig> configs,
                                                 const NetworkConfig& base, const UniversalityOptions& opts);

/// Builds the rows of one already simulated config.
std::vector<UniversalityRow> fit_ensemble(const UniversalityConfig& config, double sigma_w_sq,
                                          const EnsembleResult& ensemble, int depth, double window_lo,
                                          double window_hi);

}  // namespace mfdl
