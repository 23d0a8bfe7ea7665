#pragma once

// Deterministic Gaussian expectations.
//
// Two evaluation routes share one rule object:
//   * Gauss-Hermite nodes/weights for the standard normal measure
//     (expect1 / expect2), exact on polynomials of degree <= 2*order-1.
//   * Composite Gauss-Legendre panels over the truncated normal measure
//     (expect_panels / expect_affine / expect_product), split at caller-given
//     breakpoints. Piecewise-linear activations (ReLU, HardTanh) and steep
//     smooth ones (tanh at large q) converge slowly under Gauss-Hermite, so
//     the mean-field recursions integrate through the panel route.

#include "mfdl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace mfdl {

inline constexpr int kDefaultQuadOrder = 64;
inline constexpr int kMaxQuadOrder = 512;

// Panels cover [-kPanelCutoff, kPanelCutoff]; normal mass outside is < 3e-19.
inline constexpr double kPanelCutoff = 9.0;
// Largest panel width in units of the integration variable z.
inline constexpr double kMaxPanelWidthZ = 1.0;
// Largest panel width in units of the integrand argument (pre-activation u).
inline constexpr double kDefaultPanelWidthU = 1.0;
// Panels per integral are capped so huge scales stay affordable.
inline constexpr int kMaxPanels = 2048;

struct QuadratureRule {
    // Gauss-Hermite abscissae for the standard normal measure, ascending.
    std::vector<double> nodes;
    // Positive weights summing to one.
    std::vector<double> weights;
    int order = 0;

    // Gauss-Legendre reference rule on [-1, 1] for the panel route.
    std::vector<double> panel_nodes;
    std::vector<double> panel_weights;
};

/// Gauss-Hermite rule for the standard normal measure (physicists' nodes / sqrt 2,
/// weights / sqrt pi), generated by Golub-Welsch. The panel rule gets
/// max(8, order / 4) Gauss-Legendre points. Throws InvalidArgument unless
/// 2 <= order <= 512.
QuadratureRule make_rule(int order = kDefaultQuadOrder);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int points, std::vector<double>& nodes, std::vector<double>& weights);

namespace detail {

[[noreturn]] void throw_non_finite(const char* where);
void check_correlation(double c);

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

// Sorted cut points inside (-cutoff, cutoff), including both ends.
std::vector<double> panel_cuts(std::span<const double> breakpoints);

}  // namespace detail

/// Sum_i w_i f(z_i), the Gauss-Hermite approximation of the integral of f against Dz.
template <class F>
double expect1(F&& f, const QuadratureRule& rule) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(rule.nodes[i]);
    if (!std::isfinite(acc)) detail::throw_non_finite("expect1");
    return acc;
}

/// Tensor-product sum over both variables. The correlation c is only validated
/// here: substituting u1/u2 is up to f.
template <class F>
double expect2(F&& f, double c, const QuadratureRule& rule) {
    detail::check_correlation(c);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) row += rule.weights[j] * f(rule.nodes[i], rule.nodes[j]);
        acc += rule.weights[i] * row;
    }
    if (!std::isfinite(acc)) detail::throw_non_finite("expect2");
    return acc;
}

/// Integral of f against Dz by Gauss-Legendre panels no wider than max_width,
/// with cuts at every breakpoint (z units). Normalized by the quadrature's own
/// measure so constants integrate exactly.
template <class F>
double expect_panels(F&& f, std::span<const double> breakpoints, double max_width, const QuadratureRule& rule) {
    const auto cuts = detail::panel_cuts(breakpoints);
    const double width = std::max(std::min(max_width, kMaxPanelWidthZ), 2.0 * kPanelCutoff / kMaxPanels);
    const std::size_t points = rule.panel_nodes.size();
    double acc = 0.0;
    double mass = 0.0;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s];
        const double b = cuts[s + 1];
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / width - 1e-12)));
        const double step = (b - a) / pieces;
        for (int k = 0; k < pieces; ++k) {
            const double lo = a + step * k;
            const double half = 0.5 * step;
            const double mid = lo + half;
            for (std::size_t m = 0; m < points; ++m) {
                const double z = mid + half * rule.panel_nodes[m];
                const double w = half * rule.panel_weights[m] * detail::normal_pdf(z);
                acc += w * f(z);
                mass += w;
            }
        }
    }
    if (!std::isfinite(acc)) detail::throw_non_finite("expect_panels");
    return acc / mass;
}

/// E[f(offset + slope * z)] with f's kinks given in argument units.
template <class F>
double expect_affine(F&& f, double offset, double slope, std::span<const double> kinks,
                     const QuadratureRule& rule, double width_u = kDefaultPanelWidthU) {
    if (slope == 0.0) {
        const double v = f(offset);
        if (!std::isfinite(v)) detail::throw_non_finite("expect_affine");
        return v;
    }
    const double scale = std::abs(slope);
    std::vector<double> zk;
    zk.reserve(kinks.size());
    for (double k : kinks) zk.push_back((k - offset) / slope);
    return expect_panels([&](double z) { return f(offset + slope * z); }, zk, width_u / scale, rule);
}

/// E[f1(u1) f2(u2)] for u1 = s1 z1, u2 = s2 (c z1 + sqrt(1 - c^2) z2), integrated
/// as an outer panel sum over z1 of f1(u1) times the inner expectation over z2.
/// Kinks are given in argument units for each factor. |c| must be <= 1.
template <class F1, class F2>
double expect_product(F1&& f1, F2&& f2, double s1, double s2, double c, std::span<const double> kinks1,
                      std::span<const double> kinks2, const QuadratureRule& rule,
                      double width_u = kDefaultPanelWidthU) {
    detail::check_correlation(c);
    const double sc = std::sqrt(std::max(0.0, 1.0 - c * c));
    const double lead = s2 * c;  // slope of u2 along z1

    std::vector<double> zk;
    if (s1 != 0.0)
        for (double k : kinks1) zk.push_back(k / s1);
    // When the inner variance is small, f2's kinks survive into the outer integrand.
    if (lead != 0.0)
        for (double k : kinks2) zk.push_back(k / lead);
    const double outer_scale = std::max(std::abs(s1), std::abs(lead));
    const double outer_width = outer_scale > 0.0 ? width_u / outer_scale : kMaxPanelWidthZ;

    return expect_panels(
        [&](double z1) {
            const double a = f1(s1 * z1);
            if (a == 0.0) return 0.0;
            return a * expect_affine(f2, lead * z1, s2 * sc, kinks2, rule, width_u);
        },
        zk, outer_width, rule);
}

}  // namespace mfdl
