#include "mfdl/meanfield.hpp"

#include "mfdl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mfdl {

namespace {

constexpr double kDivergenceCeiling = 1e200;
constexpr int kEscapeRun = 100;

// Damped fixed-point iteration shared by the q and c solvers. Switches to a
// damping factor of 0.5 the first time successive steps change sign. While
// undamped steps shrink monotonically the iterates form a near-geometric tail,
// and every second step jumps to its Aitken limit when that limit stays inside
// the open domain (lo, hi).
template <class Map>
FixedPointResult iterate_to_fixed_point(Map&& map, double x0, double lo, double hi, const SolverOptions& opts,
                                        const char* what) {
    if (!(opts.tol > 0.0)) throw InvalidArgument(std::string(what) + ": tol must be positive");
    if (opts.max_iter < 1) throw InvalidArgument(std::string(what) + ": max_iter must be >= 1");
    double x = x0;
    double damping = 1.0;
    double prev_step = 0.0;
    int growing = 0;
    for (int it = 0; it < opts.max_iter; ++it) {
        const double next = map(x);
        if (!std::isfinite(next) || std::abs(next) > kDivergenceCeiling)
            throw ConvergenceError(std::string(what) + ": iteration diverged", x, it);
        const double step = next - x;
        if (std::abs(step) < opts.tol) return {x, it};
        const bool same_sign = prev_step != 0.0 && (step > 0.0) == (prev_step > 0.0);
        if (prev_step != 0.0 && !same_sign) damping = 0.5;
        // A contraction shrinks its steps; a long run of non-shrinking
        // same-sign steps means the iterates are escaping.
        growing = (same_sign && std::abs(step) >= std::abs(prev_step)) ? growing + 1 : 0;
        if (growing >= kEscapeRun)
            throw ConvergenceError(std::string(what) + ": iterates escape to infinity", x, it);
        if (damping == 1.0 && same_sign && std::abs(step) < std::abs(prev_step)) {
            const double jump = x + step / (1.0 - step / prev_step);
            if (jump > lo && jump < hi) {
                x = jump;
                prev_step = 0.0;
                continue;
            }
        }
        prev_step = step;
        x += damping * step;
    }
    throw ConvergenceError(std::string(what) + ": no convergence within " + std::to_string(opts.max_iter) +
                               " iterations",
                           x, opts.max_iter);
}

double clamp_correlation(double c) {
    return std::clamp(c, -1.0 + kCorrelationClamp, 1.0 - kCorrelationClamp);
}

// Scale at which derivative statistics are evaluated: q itself, or 1 for
// positively homogeneous activations whose phi' does not see the scale.
double derivative_scale(double q, ActivationKind a) { return positively_homogeneous(a) ? 1.0 : q; }

FixedPointResult iterate_c(double q_star, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule,
                           double c0, const SolverOptions& opts) {
    const auto map = [&](double c) {
        const LengthState s{q_star, q_star, std::clamp(c, -1.0, 1.0), 0};
        return c_step(s, p, a, rule).c_ab;
    };
    return iterate_to_fixed_point(map, c0, -1.0, 1.0, opts, "c_fixed_point");
}

}  // namespace

void MeanFieldParams::validate(bool allow_zero_weights) const {
    if (!(sigma_w_sq > 0.0 || (allow_zero_weights && sigma_w_sq == 0.0)) || !std::isfinite(sigma_w_sq))
        throw InvalidArgument("sigma_w_sq must be positive, got " + std::to_string(sigma_w_sq));
    if (!(sigma_b_sq >= 0.0) || !std::isfinite(sigma_b_sq))
        throw InvalidArgument("sigma_b_sq must be non-negative, got " + std::to_string(sigma_b_sq));
    if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in (0, 1], got " + std::to_string(rho));
}

double q_step(double q, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule) {
    p.validate();
    if (!(q >= 0.0) || !std::isfinite(q)) throw InvalidArgument("q_step: q must be finite and >= 0");
    const double second_moment = activation_average(
        [a](double u) {
            const double y = value(a, u);
            return y * y;
        },
        q, a, rule);
    return p.sigma_w_sq / p.rho * second_moment + p.sigma_b_sq;
}

FixedPointResult q_fixed_point(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule, double q0,
                               SolverOptions opts) {
    p.validate();
    if (!(q0 > 0.0)) throw InvalidArgument("q_fixed_point: q0 must be positive");
    return iterate_to_fixed_point([&](double q) { return q_step(std::max(q, 0.0), p, a, rule); }, q0, 0.0,
                                  std::numeric_limits<double>::infinity(), opts,
                                  "q_fixed_point");
}

double q_ab_step(const LengthState& s, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule) {
    p.validate();
    if (!(s.q_aa >= 0.0 && s.q_bb >= 0.0)) throw InvalidArgument("q_ab_step: lengths must be >= 0");
    detail::check_correlation(s.c_ab);
    const double c = clamp_correlation(s.c_ab);
    const auto phi = [a](double u) { return value(a, u); };
    const auto kinks = breakpoints(a);
    const double cross = expect_product(phi, phi, std::sqrt(s.q_aa), std::sqrt(s.q_bb), c, kinks, kinks, rule);
    return p.sigma_w_sq * cross + p.sigma_b_sq;
}

LengthState c_step(const LengthState& s, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule) {
    const double q_aa = q_step(s.q_aa, p, a, rule);
    const double q_bb = q_step(s.q_bb, p, a, rule);
    const double q_ab = q_ab_step(s, p, a, rule);
    if (!(q_aa > 0.0 && q_bb > 0.0))
        throw DegenerateState("c_step: zero length makes the correlation undefined");
    const double c = q_ab / std::sqrt(q_aa * q_bb);
    return {q_aa, q_bb, std::clamp(c, -1.0, 1.0), s.layer + 1};
}

FixedPointResult c_fixed_point(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule, double c0,
                               SolverOptions opts) {
    p.validate();
    if (!(c0 > -1.0 && c0 < 1.0)) throw InvalidArgument("c_fixed_point: c0 must lie in (-1, 1)");
    try {
        const double q_star = q_fixed_point(p, a, rule, 1.0, opts).value;
        return iterate_c(q_star, p, a, rule, c0, opts);
    } catch (const ConvergenceError&) {
        if (!positively_homogeneous(a)) throw;
        // Lengths grow without bound; for a homogeneous phi the bias becomes
        // negligible and the correlation map tends to its sigma_b^2 = 0 form,
        // which is scale free.
        MeanFieldParams scale_free = p;
        scale_free.sigma_b_sq = 0.0;
        return iterate_c(1.0, scale_free, a, rule, c0, opts);
    }
}

double chi1(double q_star, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule) {
    p.validate();
    if (!(q_star >= 0.0)) throw InvalidArgument("chi1: q_star must be >= 0");
    const double mean_sq_slope = activation_average(
        [a](double u) {
            const double d = derivative(a, u);
            return d * d;
        },
        derivative_scale(q_star, a), a, rule);
    return p.sigma_w_sq / p.rho * mean_sq_slope;
}

double chi2(double q_star, double c_star, const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule) {
    p.validate();
    if (!(q_star >= 0.0)) throw InvalidArgument("chi2: q_star must be >= 0");
    detail::check_correlation(c_star);
    const double s = std::sqrt(derivative_scale(q_star, a));
    const auto dphi = [a](double u) { return derivative(a, u); };
    const auto kinks = breakpoints(a);
    return p.sigma_w_sq * expect_product(dphi, dphi, s, s, clamp_correlation(c_star), kinks, kinks, rule);
}

double depth_scale(double chi) {
    if (std::abs(chi - 1.0) < kUnitChiTolerance) return std::numeric_limits<double>::infinity();
    return std::abs(1.0 / std::log(std::abs(chi)));
}

DepthScales depth_scales(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule,
                         SolverOptions opts) {
    p.validate();
    DepthScales out;
    out.q_star = q_fixed_point(p, a, rule, 1.0, opts).value;
    out.c_star = iterate_c(out.q_star, p, a, rule, 0.9, opts).value;
    out.chi1 = chi1(out.q_star, p, a, rule);
    out.chi2 = chi2(out.q_star, out.c_star, p, a, rule);
    out.xi1 = depth_scale(out.chi1);
    out.xi2 = depth_scale(out.chi2);
    return out;
}

double c_convergence_rate(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule, double c0,
                          int layers, SolverOptions opts) {
    p.validate();
    if (layers < 10) throw InvalidArgument("c_convergence_rate: need at least 10 layers");
    if (!(c0 > -1.0 && c0 < 1.0)) throw InvalidArgument("c_convergence_rate: c0 must lie in (-1, 1)");
    const double q_star = q_fixed_point(p, a, rule, 1.0, opts).value;
    const double c_star = iterate_c(q_star, p, a, rule, c0, opts).value;

    constexpr double kFloor = 1e-12;
    const int skip = layers / 5;
    std::vector<double> ls;
    std::vector<double> logs;
    LengthState s{q_star, q_star, c0, 0};
    for (int l = 1; l <= layers; ++l) {
        s = c_step(s, p, a, rule);
        const double gap = std::abs(s.c_ab - c_star);
        if (gap < kFloor) break;
        if (l > skip) {
            ls.push_back(l);
            logs.push_back(std::log(gap));
        }
    }
    if (ls.size() < 3)
        throw ConvergenceError("c_convergence_rate: trajectory does not decay exponentially (too few points)",
                               s.c_ab, s.layer);

    double ml = 0.0, my = 0.0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
        ml += ls[i];
        my += logs[i];
    }
    ml /= ls.size();
    my /= ls.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
        sxy += (ls[i] - ml) * (logs[i] - my);
        sxx += (ls[i] - ml) * (ls[i] - ml);
    }
    const double slope = sxy / sxx;
    if (!(slope < 0.0))
        throw ConvergenceError("c_convergence_rate: trajectory does not decay exponentially", s.c_ab, s.layer);
    return -1.0 / slope;
}

}  // namespace mfdl
