#pragma once

// Closed-form gradient metrics of deep linear dropout networks when the
// backward pass reuses the forward weights, and the explicitly expanded
// last-three-layer expressions they were induced from.

#include "mfdl/meanfield.hpp"

namespace mfdl {

enum class PairKind { SingleInput, InputPair };

struct LinearGradPrediction {
    int layer = 0;
    int depth = 0;
    double g_aa = 0.0;
    double g_ab = 0.0;
};

/// 4 (q*/rho)^2 (sigma_w^2/rho)^(L-l) [rho + sum_{j=1}^{L-l} (sigma_w^2/rho)^j].
double g_aa_closed(int layer, int depth, const MeanFieldParams& p, double q_star);

/// 4 (q*_ab)^2 (sigma_w^2)^(L-l) [1 + sum_{j=1}^{L-l} (sigma_w^2/rho^2)^j].
double g_ab_closed(int layer, int depth, const MeanFieldParams& p, double q_ab_star);

// Natural logs of the closed forms; finite far beyond double range.
double log_g_aa_closed(int layer, int depth, const MeanFieldParams& p, double q_star);
double log_g_ab_closed(int layer, int depth, const MeanFieldParams& p, double q_ab_star);

LinearGradPrediction linear_prediction(int layer, int depth, const MeanFieldParams& p, double q_star,
                                       double q_ab_star);

/// Backpropagated length E[delta_a delta_a] (or E[delta_a delta_b]) at layer L-k,
/// k in {0, 1, 2}, from the term-by-term expansions. `q` is q*_aa for
/// SingleInput and q*_ab for InputPair.
double appendix_layer_oracle(int k, PairKind which, const MeanFieldParams& p, double q);

/// Factor turning a backpropagated length into the weight-gradient metric:
/// q*/rho for a single input, q*_ab for a pair.
double delta_to_gradient_factor(PairKind which, const MeanFieldParams& p, double q);

struct BaselinePrediction {
    double g_aa = 0.0;
    double g_ab = 0.0;
};

/// Gradient-independence extrapolation g^l = g^L chi^(L-l).
BaselinePrediction independence_baseline(int layer, int depth, double chi1, double chi2, double g_L_aa,
                                         double g_L_ab);

}  // namespace mfdl
