#include "mfdl/phase.hpp"

#include "mfdl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mfdl {

std::vector<double> log_grid(double lo, double hi, int points) {
    if (!(lo > 0.0 && hi >= lo) || points < 1) throw InvalidArgument("log_grid: need 0 < lo <= hi and points >= 1");
    if (points == 1) return {lo};
    std::vector<double> g(static_cast<std::size_t>(points));
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (int i = 0; i < points; ++i) g[i] = std::exp(a + (b - a) * i / (points - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

std::vector<double> linear_grid(double lo, double hi, int points) {
    if (!(hi >= lo) || points < 1) throw InvalidArgument("linear_grid: need lo <= hi and points >= 1");
    if (points == 1) return {lo};
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1);
    g.back() = hi;
    return g;
}

PhaseCurve depth_scale_grid(std::span<const double> grid, const MeanFieldParams& base, ActivationKind a,
                            const QuadratureRule& rule, double multiplier, double baseline_multiplier) {
    if (grid.empty()) throw InvalidArgument("depth_scale_grid: empty grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw InvalidArgument("depth_scale_grid: grid must be strictly ascending");

    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    PhaseCurve c;
    for (double sw : grid) {
        MeanFieldParams p = base;
        p.sigma_w_sq = sw;
        c.sigma_w_sq.push_back(sw);
        try {
            const DepthScales d = depth_scales(p, a, rule);
            c.q_star.push_back(d.q_star);
            c.c_star.push_back(d.c_star);
            c.chi1.push_back(d.chi1);
            c.chi2.push_back(d.chi2);
            c.xi1.push_back(d.xi1);
            c.xi2.push_back(d.xi2);
            c.b12xi1.push_back(multiplier * d.xi1);
            c.b6xi2.push_back(baseline_multiplier * d.xi2);
            c.b12xi2.push_back(multiplier * d.xi2);
            c.trainable_bound.push_back(std::min(multiplier * d.xi1, multiplier * d.xi2));
            c.converged.push_back(1);
            c.diagnostic.emplace_back();
        } catch (const std::exception& e) {
            for (auto* v : {&c.q_star, &c.c_star, &c.chi1, &c.chi2, &c.xi1, &c.xi2, &c.b12xi1, &c.b6xi2, &c.b12xi2,
                            &c.trainable_bound})
                v->push_back(nan);
            c.converged.push_back(0);
            c.diagnostic.emplace_back(e.what());
        }
    }
    return c;
}

double chi1_at(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule) {
    if (positively_homogeneous(a)) return chi1(1.0, p, a, rule);
    return chi1(q_fixed_point(p, a, rule).value, p, a, rule);
}

double chi1_level(const MeanFieldParams& base, ActivationKind a, const QuadratureRule& rule, double target,
                  double lo, double hi, double tol) {
    if (!(lo > 0.0 && hi > lo)) throw InvalidArgument("chi1_level: need 0 < lo < hi");
    if (!(tol > 0.0)) throw InvalidArgument("chi1_level: tol must be positive");
    auto excess = [&](double sw) {
        MeanFieldParams p = base;
        p.sigma_w_sq = sw;
        return chi1_at(p, a, rule) - target;
    };
    double f_lo = excess(lo);
    const double f_hi = excess(hi);
    if (!(f_lo < 0.0 && f_hi > 0.0))
        throw InvalidArgument("chi1_level: chi1 does not cross " + std::to_string(target) + " inside [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = excess(mid);
        if (f_mid == 0.0) return mid;
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double critical_line(const MeanFieldParams& base, ActivationKind a, const QuadratureRule& rule, double lo,
                     double hi, double tol) {
    return chi1_level(base, a, rule, 1.0, lo, hi, tol);
}

double trainable_length(const DepthScales& d, double multiplier) {
    return std::min(multiplier * d.xi1, multiplier * d.xi2);
}

double trainable_length(const MeanFieldParams& p, ActivationKind a, const QuadratureRule& rule, double multiplier) {
    return trainable_length(depth_scales(p, a, rule), multiplier);
}

}  // namespace mfdl
