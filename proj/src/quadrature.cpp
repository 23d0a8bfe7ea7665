#include "mfdl/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <string>

namespace mfdl {

namespace {

// Orthonormal probabilists' Hermite recurrence:
//   p_{k+1}(x) = (x p_k(x) - sqrt(k) p_{k-1}(x)) / sqrt(k + 1).
// Returns the Christoffel weight 1 / sum_{k<n} p_k(x)^2 and Newton-refines x
// against p_n. Scaled to stay finite for the largest nodes of order 512.
double refine_hermite_node(int n, double& x) {
    double weight = 0.0;
    for (int pass = 0; pass < 4; ++pass) {
        double p_prev = 0.0;
        double p = 1.0;  // p_0 for the probability measure
        double dp_prev = 0.0;
        double dp = 0.0;
        double log_scale = 0.0;  // every p / dp value is multiplied by exp(-log_scale)
        double sum_sq = 1.0;
        for (int k = 0; k < n; ++k) {
            const double a = 1.0 / std::sqrt(k + 1.0);
            const double b = std::sqrt(static_cast<double>(k));
            const double p_next = a * (x * p - b * p_prev);
            const double dp_next = a * (p + x * dp - b * dp_prev);
            p_prev = p;
            p = p_next;
            dp_prev = dp;
            dp = dp_next;
            if (k + 1 < n) sum_sq += p * p;
            const double mag = std::abs(p) + std::abs(dp);
            if (mag > 1e100) {
                p *= 1e-100;
                p_prev *= 1e-100;
                dp *= 1e-100;
                dp_prev *= 1e-100;
                sum_sq *= 1e-200;
                log_scale += 100.0 * std::numbers::ln10;
            }
        }
        // sum_sq is scaled by exp(-2 log_scale) relative to the true sum.
        weight = std::exp(-std::log(sum_sq) - 2.0 * log_scale);
        if (pass < 3 && dp != 0.0) x -= p / dp;
    }
    return weight;
}

}  // namespace

void gauss_legendre(int points, std::vector<double>& nodes, std::vector<double>& weights) {
    if (points < 1) throw InvalidArgument("gauss_legendre: points must be positive");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(points, points);
    for (int k = 1; k < points; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    nodes.resize(points);
    weights.resize(points);
    for (int i = 0; i < points; ++i) {
        nodes[i] = eig.eigenvalues()(i);
        const double v0 = eig.eigenvectors()(0, i);
        weights[i] = 2.0 * v0 * v0;
    }
    for (int i = 0; i < points / 2; ++i) {
        const int j = points - 1 - i;
        const double x = 0.5 * (nodes[j] - nodes[i]);
        const double w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = weights[j] = w;
    }
    if (points % 2 == 1) nodes[points / 2] = 0.0;
}

QuadratureRule make_rule(int order) {
    if (order < 2 || order > kMaxQuadOrder)
        throw InvalidArgument("make_rule: order must lie in [2, " + std::to_string(kMaxQuadOrder) + "], got " +
                              std::to_string(order));

    // Jacobi matrix of the probabilists' Hermite polynomials.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        const double b = std::sqrt(static_cast<double>(k));
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi, Eigen::EigenvaluesOnly);

    QuadratureRule rule;
    rule.order = order;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (int i = 0; i < order; ++i) {
        double x = eig.eigenvalues()(i);
        rule.weights[i] = refine_hermite_node(order, x);
        rule.nodes[i] = x;
    }
    for (int i = 0; i < order / 2; ++i) {
        const int j = order - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;

    double total = 0.0;
    for (double w : rule.weights) total += w;
    for (double& w : rule.weights) w /= total;

    gauss_legendre(std::max(8, order / 4), rule.panel_nodes, rule.panel_weights);
    return rule;
}

namespace detail {

void throw_non_finite(const char* where) {
    throw EvaluationError(std::string(where) + ": integrand is not finite on a quadrature node");
}

void check_correlation(double c) {
    if (!(std::abs(c) <= 1.0)) throw InvalidArgument("correlation must lie in [-1, 1], got " + std::to_string(c));
}

std::vector<double> panel_cuts(std::span<const double> breakpoints) {
    std::vector<double> cuts{-kPanelCutoff, kPanelCutoff};
    for (double b : breakpoints)
        if (std::isfinite(b) && b > -kPanelCutoff && b < kPanelCutoff) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
}

}  // namespace detail

}  // namespace mfdl
