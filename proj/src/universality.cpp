#include "mfdl/universality.hpp"

#include "mfdl/error.hpp"
#include "mfdl/phase.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mfdl {

namespace {

struct Line {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Ordinary least squares of y on x; throws when x has no spread.
Line least_squares(const std::vector<double>& x, const std::vector<double>& y, const char* where) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw InvalidArgument(std::string(where) + ": abscissae are all equal");
    Line line;
    line.slope = sxy / sxx;
    line.intercept = my - line.slope * mx;
    line.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    return line;
}

}  // namespace

PowerLawFit fit_power_law(std::span<const double> means, std::span<const double> variances) {
    if (means.size() != variances.size()) throw InvalidArgument("fit_power_law: length mismatch");
    if (means.size() < 3) throw InvalidArgument("fit_power_law: need at least 3 points");
    const std::size_t n = means.size();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(means[i] > 0.0) || !(variances[i] > 0.0) || !std::isfinite(means[i]) || !std::isfinite(variances[i]))
            throw InvalidArgument("fit_power_law: means and variances must be finite and > 0");
        x[i] = std::log(means[i]);
        y[i] = std::log(variances[i]);
    }
    const Line line = least_squares(x, y, "fit_power_law");
    PowerLawFit fit;
    fit.exponent = line.slope;
    fit.log_intercept = line.intercept;
    fit.r_squared = line.r_squared;
    fit.n_points = static_cast<int>(n);
    return fit;
}

LogSlopeFit fit_log_slope(std::span<const double> per_layer, double lo, double hi) {
    const int depth = static_cast<int>(per_layer.size());
    if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) throw InvalidArgument("fit_log_slope: need 0 <= lo < hi <= 1");
    LogSlopeFit fit;
    fit.first_layer = std::max(1, static_cast<int>(std::ceil(lo * depth)));
    fit.last_layer = std::min(depth, static_cast<int>(std::floor(hi * depth)));
    std::vector<double> x, y;
    for (int l = fit.first_layer; l <= fit.last_layer; ++l) {
        const double v = per_layer[l - 1];
        if (!(v > 0.0) || !std::isfinite(v)) continue;
        x.push_back(l);
        y.push_back(std::log(v));
    }
    if (x.size() < 3) throw InvalidArgument("fit_log_slope: fewer than 3 usable layers");
    const Line line = least_squares(x, y, "fit_log_slope");
    fit.slope = line.slope;
    fit.intercept = line.intercept;
    fit.r_squared = line.r_squared;
    fit.n_points = static_cast<int>(x.size());
    return fit;
}

double default_universality_sigma_w_sq(ActivationKind a, double rho, double sigma_b_sq, const QuadratureRule& rule) {
    switch (a) {
        case ActivationKind::Linear: return kUniversalityChi1 * rho;
        case ActivationKind::ReLU: return 2.0 * kUniversalityChi1 * rho;
        default: return chi1_level({1.0, sigma_b_sq, rho}, a, rule, kUniversalityChi1, 1e-6, 16.0);
    }
}

std::vector<UniversalityRow> fit_ensemble(const UniversalityConfig& config, double sigma_w_sq,
                                          const EnsembleResult& ensemble, int depth, double window_lo,
                                          double window_hi) {
    const int first = std::max(1, static_cast<int>(std::ceil(window_lo * depth)));
    const int last = std::min(depth, static_cast<int>(std::floor(window_hi * depth)));
    std::vector<UniversalityRow> rows;
    for (Metric m : kGradientMetrics) {
        UniversalityRow row;
        row.config = config;
        row.sigma_w_sq = sigma_w_sq;
        row.metric = m;
        const auto it = ensemble.stats.find(m);
        if (it == ensemble.stats.end()) {
            row.error = "metric not simulated";
            rows.push_back(std::move(row));
            continue;
        }
        const EnsembleStats& s = it->second;
        for (int l = first; l <= last; ++l) {
            const double mean = s.mean[l - 1];
            const double var = s.variance[l - 1];
            if (!(mean >= kUnderflowFloor) || !(var > 0.0) || !std::isfinite(mean) || !std::isfinite(var)) {
                ++row.n_excluded;
                continue;
            }
            row.layers.push_back(l);
            row.means.push_back(mean);
            row.variances.push_back(var);
        }
        try {
            row.fit = fit_power_law(row.means, row.variances);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<UniversalityRow> universality_report(std::span<const UniversalityConfig> configs,
                                                 const NetworkConfig& base, const UniversalityOptions& opts) {
    if (configs.empty()) throw InvalidArgument("universality_report: no configurations");
    if (!(opts.window_lo >= 0.0 && opts.window_lo < opts.window_hi && opts.window_hi <= 1.0))
        throw InvalidArgument("universality_report: fit window must satisfy 0 <= lo < hi <= 1");

    EnsembleOptions eo = opts.ensemble;
    eo.metrics.assign(std::begin(kGradientMetrics), std::end(kGradientMetrics));

    const QuadratureRule rule = make_rule(eo.quad_order);
    std::vector<UniversalityRow> out;
    for (const UniversalityConfig& uc : configs) {
        double sw = uc.sigma_w_sq.value_or(0.0);
        try {
            if (!uc.sigma_w_sq) sw = default_universality_sigma_w_sq(uc.activation, uc.rho, base.params.sigma_b_sq, rule);
            NetworkConfig cfg = base;
            cfg.activation = uc.activation;
            cfg.width = uc.width;
            cfg.params.rho = uc.rho;
            cfg.params.sigma_w_sq = sw;
            const EnsembleResult ens = ensemble_run(cfg, eo);
            auto rows = fit_ensemble(uc, sw, ens, cfg.depth, opts.window_lo, opts.window_hi);
            out.insert(out.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
        } catch (const std::exception& e) {
            for (Metric m : kGradientMetrics) {
                UniversalityRow row;
                row.config = uc;
                row.sigma_w_sq = sw;
                row.metric = m;
                row.error = e.what();
                out.push_back(std::move(row));
            }
        }
    }
    return out;
}

}  // namespace mfdl
