#include "mfdl/linear_theory.hpp"

#include "mfdl/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mfdl {

namespace {

// Above this many layers from the output the powers and sums are evaluated
// in log space.
constexpr int kLogSpaceThreshold = 50;

int layers_from_output(int layer, int depth) {
    if (depth < 1) throw InvalidArgument("depth must be >= 1");
    if (layer < 1 || layer > depth)
        throw InvalidArgument("layer " + std::to_string(layer) + " outside [1, " + std::to_string(depth) + "]");
    return depth - layer;
}

// sum_{j=1}^{k} r^j by direct accumulation.
double geometric_tail(double r, int k) {
    double term = 1.0;
    double sum = 0.0;
    for (int j = 1; j <= k; ++j) {
        term *= r;
        sum += term;
    }
    return sum;
}

// ln(lead + sum_{j=1}^{k} r^j) for r > 0, lead > 0, without forming r^k.
double log_bracket(double lead, double r, int k) {
    if (r == 1.0) return std::log(lead + k);
    const double log_r = std::log(r);
    if (r < 1.0) {
        // r (1 - r^k) / (1 - r)
        const double sum = -r * std::expm1(k * log_r) / (1.0 - r);
        return std::log(lead + sum);
    }
    // Factor r^k out: lead r^-k + r (1 - r^-k) / (r - 1).
    const double inv_pow = std::exp(-k * log_r);
    return k * log_r + std::log(lead * inv_pow - r * std::expm1(-k * log_r) / (r - 1.0));
}

}  // namespace

double log_g_aa_closed(int layer, int depth, const MeanFieldParams& p, double q_star) {
    p.validate();
    const int k = layers_from_output(layer, depth);
    const double r = p.sigma_w_sq / p.rho;
    return std::log(4.0) + 2.0 * std::log(std::abs(q_star) / p.rho) + k * std::log(r) + log_bracket(p.rho, r, k);
}

double log_g_ab_closed(int layer, int depth, const MeanFieldParams& p, double q_ab_star) {
    p.validate();
    const int k = layers_from_output(layer, depth);
    const double t = p.sigma_w_sq / (p.rho * p.rho);
    return std::log(4.0) + 2.0 * std::log(std::abs(q_ab_star)) + k * std::log(p.sigma_w_sq) +
           log_bracket(1.0, t, k);
}

double g_aa_closed(int layer, int depth, const MeanFieldParams& p, double q_star) {
    p.validate();
    const int k = layers_from_output(layer, depth);
    if (k > kLogSpaceThreshold) return std::exp(log_g_aa_closed(layer, depth, p, q_star));
    const double r = p.sigma_w_sq / p.rho;
    const double lead = q_star / p.rho;
    return 4.0 * lead * lead * std::pow(r, k) * (p.rho + geometric_tail(r, k));
}

double g_ab_closed(int layer, int depth, const MeanFieldParams& p, double q_ab_star) {
    p.validate();
    const int k = layers_from_output(layer, depth);
    if (k > kLogSpaceThreshold) return std::exp(log_g_ab_closed(layer, depth, p, q_ab_star));
    const double t = p.sigma_w_sq / (p.rho * p.rho);
    return 4.0 * q_ab_star * q_ab_star * std::pow(p.sigma_w_sq, k) * (1.0 + geometric_tail(t, k));
}

LinearGradPrediction linear_prediction(int layer, int depth, const MeanFieldParams& p, double q_star,
                                       double q_ab_star) {
    return {layer, depth, g_aa_closed(layer, depth, p, q_star), g_ab_closed(layer, depth, p, q_ab_star)};
}

double appendix_layer_oracle(int k, PairKind which, const MeanFieldParams& p, double q) {
    p.validate();
    if (k < 0 || k > 2) throw InvalidArgument("appendix_layer_oracle: only k in {0, 1, 2} is expanded");
    const double sw = p.sigma_w_sq;
    const double rho = p.rho;
    if (which == PairKind::SingleInput) {
        const double r = sw / rho;
        switch (k) {
            case 0: return 4.0 * q;
            case 1: return 4.0 * (q / rho) * r * (rho + r);
            default: return 4.0 * (q / rho) * (r * r) * (rho + r + r * r);
        }
    }
    const double t = sw / (rho * rho);
    switch (k) {
        case 0: return 4.0 * q;
        case 1: return 4.0 * q * sw * (1.0 + t);
        default: return 4.0 * q * (sw * sw) * (1.0 + t + t * t);
    }
}

double delta_to_gradient_factor(PairKind which, const MeanFieldParams& p, double q) {
    return which == PairKind::SingleInput ? q / p.rho : q;
}

BaselinePrediction independence_baseline(int layer, int depth, double chi1, double chi2, double g_L_aa,
                                         double g_L_ab) {
    if (layer > depth) throw InvalidArgument("independence_baseline: layer must not exceed depth");
    const int k = depth - layer;
    return {g_L_aa * std::pow(chi1, k), g_L_ab * std::pow(chi2, k)};
}

}  // namespace mfdl
