#pragma once

// Finite-width Monte-Carlo dropout networks.
//
//   z^l = (1/rho) W^l (p^l . y^{l-1}) + b^l,   y^l = phi(z^l),   y^0 = x
//
// with W^l_ij ~ N(0, sigma_w^2 / N), b^l_i ~ N(0, sigma_b^2) and masks
// p^l ~ Bernoulli(rho) drawn per input. The loss is E = sum_i (z^L_i)^2 and
// the backward pass reuses the forward weights and masks:
//
//   delta^L = 2 z^L,   delta^l = phi'(z^l) . (p^{l+1}/rho) . (W^{l+1})^T delta^{l+1}
//   dE/dW^l_ij = delta^l_i (p^l_j / rho) y^{l-1}_j
//
// Weight matrices are never required to be resident: each layer is
// regenerated row by row from its own stream, or read from a cache when the
// whole network fits the memory budget. Both paths produce identical values.

#include "mfdl/activations.hpp"
#include "mfdl/meanfield.hpp"
#include "mfdl/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mfdl {

struct NetworkConfig {
    int depth = 1;  // L
    int width = 2;  // N
    MeanFieldParams params;
    ActivationKind activation = ActivationKind::Linear;
    std::uint64_t seed = 0;

    void validate() const;
};

inline constexpr std::size_t kDefaultWeightCacheBytes = std::size_t{1} << 30;

class NetworkInstance {
  public:
    /// Samples instance `instance` of cfg. Weights are cached when
    /// depth * width^2 doubles fit in cache_budget_bytes.
    NetworkInstance(const NetworkConfig& cfg, std::uint64_t instance = 0,
                    std::size_t cache_budget_bytes = kDefaultWeightCacheBytes);

    const NetworkConfig& config() const { return cfg_; }
    std::uint64_t instance() const { return instance_; }
    int depth() const { return cfg_.depth; }
    int width() const { return cfg_.width; }
    bool cached() const { return !cache_.empty(); }

    /// b^l for l in [1, L].
    std::span<const double> bias(int layer) const;

    /// W^l materialized row-major (N x N), l in [1, L].
    std::vector<double> weights(int layer) const;

    /// Calls f(i, row_i) for every row of W^l in order.
    template <class F>
    void for_each_row(int layer, F&& f) const {
        check_layer(layer);
        const std::size_t n = static_cast<std::size_t>(cfg_.width);
        if (cached()) {
            const double* base = cache_[layer - 1].data();
            for (std::size_t i = 0; i < n; ++i) f(i, std::span<const double>(base + i * n, n));
            return;
        }
        Rng rng(weight_key(layer));
        std::vector<double> row(n);
        for (std::size_t i = 0; i < n; ++i) {
            fill_row(rng, row);
            f(i, std::span<const double>(row));
        }
    }

  private:
    void check_layer(int layer) const;
    std::uint64_t weight_key(int layer) const;
    void fill_row(Rng& rng, std::span<double> row) const;

    NetworkConfig cfg_;
    std::uint64_t instance_ = 0;
    double weight_sd_ = 0.0;
    std::vector<std::vector<double>> biases_;
    std::vector<std::vector<double>> cache_;
};

NetworkInstance sample_network(const NetworkConfig& cfg, std::uint64_t instance = 0,
                               std::size_t cache_budget_bytes = kDefaultWeightCacheBytes);

struct InputPair {
    std::vector<double> a;
    std::vector<double> b;
};

/// Gaussian pair with (1/N)|x_a|^2 = (1/N)|x_b|^2 = q0 and (1/N) x_a.x_b = c0 q0,
/// exact up to rounding (x_b is built from the component of a fresh draw
/// orthogonal to x_a). c0 = +-1 gives x_b = +-x_a.
InputPair sample_inputs(int width, double q0, double c0, std::uint64_t seed);

enum class InputTag { A, B };

struct ForwardTrace {
    InputTag input_id = InputTag::A;
    std::vector<double> input;                         // x = y^0
    std::vector<std::vector<double>> pre_activations;  // z^l, index l-1
    std::vector<std::vector<std::uint8_t>> masks;      // p^l, index l-1
};

/// Masks of layer l come from the stream derive_key(mask_seed, 0, role, l),
/// role MaskA or MaskB by tag.
ForwardTrace forward(const NetworkInstance& net, std::span<const double> x, std::uint64_t mask_seed,
                     InputTag tag = InputTag::A);

/// Several inputs through the same network, sharing each regenerated row.
std::vector<ForwardTrace> forward_batch(const NetworkInstance& net, std::span<const std::vector<double>> inputs,
                                        std::span<const std::uint64_t> mask_seeds,
                                        std::span<const InputTag> tags);

struct GradientTrace {
    std::vector<std::vector<double>> deltas;        // delta^l, index l-1
    std::vector<std::vector<double>> input_scaled;  // (p^l/rho) y^{l-1}, index l-1

    int depth() const { return static_cast<int>(deltas.size()); }

    /// dE/dW^l materialized row-major: entry (i, j) = delta^l_i * input_scaled^l_j.
    std::vector<double> weight_grad(int layer) const;
};

/// Throws InvalidArgument if the trace does not match the network's shape.
GradientTrace backward(const NetworkInstance& net, const ForwardTrace& trace);

std::vector<GradientTrace> backward_batch(const NetworkInstance& net, std::span<const ForwardTrace> traces);

/// Scalar loss sum_i (z^L_i)^2 of a trace.
double loss(const ForwardTrace& trace);

struct GradientMetrics {
    std::vector<double> g_aa;        // (1/N^2) sum (dE_a/dW)^2
    std::vector<double> g_ab;        // |(1/N^2) sum dE_a/dW dE_b/dW|
    std::vector<double> g_tilde_ab;  // (1/N^2) sum |dE_a/dW dE_b/dW|
};

/// Per-layer metrics (index l-1), using the rank-one structure of dE/dW.
GradientMetrics gradient_metrics(const GradientTrace& ga, const GradientTrace& gb);

struct SignalMetrics {
    std::vector<double> q_aa;  // (1/N) |z^l_a|^2
    std::vector<double> q_bb;
    std::vector<double> c_ab;  // q_ab / sqrt(q_aa q_bb)
};

SignalMetrics signal_metrics(const ForwardTrace& ta, const ForwardTrace& tb);

}  // namespace mfdl
