#pragma once

// Per-layer statistics of signal and gradient metrics over independently
// sampled (network, masks, inputs) instances.

#include "mfdl/simulator.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

namespace mfdl {

enum class Metric { QAA, CAB, GAA, GAB, GTildeAB };

inline constexpr Metric kAllMetrics[] = {Metric::QAA, Metric::CAB, Metric::GAA, Metric::GAB, Metric::GTildeAB};
inline constexpr Metric kGradientMetrics[] = {Metric::GAA, Metric::GAB, Metric::GTildeAB};

std::string_view to_string(Metric m);
/// Accepts q_aa, c_ab, g_aa, g_ab, g_tilde_ab.
Metric parse_metric(std::string_view name);

struct EnsembleStats {
    Metric metric = Metric::GAA;
    std::vector<double> mean;       // index l-1
    std::vector<double> variance;   // Bessel-corrected; NaN when n_instances == 1
    std::vector<double> std_error;  // sqrt(variance / n_instances)
    int n_instances = 0;
};

struct EnsembleOptions {
    int n_instances = 100;
    double c0 = 0.9;
    // Input length; defaults to q* of the configuration (1 when q diverges).
    std::optional<double> q0;
    // Treat the sampled pair as layer-0 pre-activations and feed phi(x) to
    // layer 1, so q0 and c0 are the arguments of the first map step.
    bool preactivation_inputs = false;
    std::vector<Metric> metrics{std::begin(kAllMetrics), std::end(kAllMetrics)};
    int threads = 1;
    // Every instance reuses the streams of instance 0.
    bool same_seed_all_instances = false;
    // Shared by all worker threads.
    std::size_t cache_budget_bytes = kDefaultWeightCacheBytes;
    int quad_order = kDefaultQuadOrder;
    // Called as progress(done, total) from worker threads.
    std::function<void(int, int)> progress;
};

struct EnsembleResult {
    std::map<Metric, EnsembleStats> stats;
    double q0 = 0.0;
    double c0 = 0.0;
    bool q0_is_fixed_point = false;
};

/// Instance i uses the streams keyed by (cfg.seed, i). Per-instance values are
/// written to fixed slots and reduced in instance order, so every statistic is
/// bit-identical for any thread count.
EnsembleResult ensemble_run(const NetworkConfig& cfg, const EnsembleOptions& opts);

/// Mean / Bessel variance / standard error of each column of `samples`
/// (samples[i][l] = value of instance i at layer l+1).
EnsembleStats reduce_samples(Metric metric, const std::vector<std::vector<double>>& samples);

}  // namespace mfdl
