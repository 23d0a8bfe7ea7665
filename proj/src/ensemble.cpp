#include "mfdl/ensemble.hpp"

#include "mfdl/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

namespace mfdl {

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::QAA: return "q_aa";
        case Metric::CAB: return "c_ab";
        case Metric::GAA: return "g_aa";
        case Metric::GAB: return "g_ab";
        case Metric::GTildeAB: return "g_tilde_ab";
    }
    return "?";
}

Metric parse_metric(std::string_view name) {
    for (Metric m : kAllMetrics)
        if (to_string(m) == name) return m;
    throw InvalidArgument("unknown metric '" + std::string(name) +
                          "' (expected q_aa, c_ab, g_aa, g_ab or g_tilde_ab)");
}

EnsembleStats reduce_samples(Metric metric, const std::vector<std::vector<double>>& samples) {
    if (samples.empty()) throw InvalidArgument("reduce_samples: no instances");
    const std::size_t n = samples.size();
    const std::size_t layers = samples.front().size();
    EnsembleStats s;
    s.metric = metric;
    s.n_instances = static_cast<int>(n);
    s.mean.assign(layers, 0.0);
    s.variance.assign(layers, 0.0);
    s.std_error.assign(layers, 0.0);
    for (std::size_t l = 0; l < layers; ++l) {
        double sum = 0.0;
        for (const auto& row : samples) sum += row[l];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& row : samples) ss += (row[l] - mean) * (row[l] - mean);
        s.mean[l] = mean;
        if (n < 2) {
            s.variance[l] = std::numeric_limits<double>::quiet_NaN();
            s.std_error[l] = std::numeric_limits<double>::quiet_NaN();
        } else {
            s.variance[l] = ss / (n - 1);
            s.std_error[l] = std::sqrt(s.variance[l] / n);
        }
    }
    return s;
}

EnsembleResult ensemble_run(const NetworkConfig& cfg, const EnsembleOptions& opts) {
    cfg.validate();
    if (cfg.width < 2) throw InvalidArgument("ensemble_run: correlations need width >= 2");
    if (opts.n_instances < 1) throw InvalidArgument("ensemble_run: n_instances must be >= 1");
    if (opts.threads < 1) throw InvalidArgument("ensemble_run: threads must be >= 1");
    if (opts.metrics.empty()) throw InvalidArgument("ensemble_run: no metrics requested");
    if (!(std::abs(opts.c0) <= 1.0)) throw InvalidArgument("ensemble_run: c0 must lie in [-1, 1]");

    EnsembleResult result;
    result.c0 = opts.c0;
    if (opts.q0) {
        result.q0 = *opts.q0;
    } else {
        try {
            result.q0 = q_fixed_point(cfg.params, cfg.activation, make_rule(opts.quad_order)).value;
            result.q0_is_fixed_point = true;
        } catch (const ConvergenceError&) {
            result.q0 = 1.0;
        }
    }

    const bool need_grad = std::any_of(opts.metrics.begin(), opts.metrics.end(), [](Metric m) {
        return m == Metric::GAA || m == Metric::GAB || m == Metric::GTildeAB;
    });
    const int n = opts.n_instances;
    const std::size_t depth = static_cast<std::size_t>(cfg.depth);
    std::map<Metric, std::vector<std::vector<double>>> slots;
    for (Metric m : opts.metrics) slots[m].assign(static_cast<std::size_t>(n), std::vector<double>(depth));

    const int threads = std::min(opts.threads, n);
    // A forward-only run visits each layer once, so caching buys nothing.
    const std::size_t budget = need_grad ? opts.cache_budget_bytes / static_cast<std::size_t>(threads) : 0;

    auto run_instance = [&](int i) {
        const std::uint64_t id = opts.same_seed_all_instances ? 0 : static_cast<std::uint64_t>(i);
        const NetworkInstance net(cfg, id, budget);
        const InputPair x = sample_inputs(cfg.width, result.q0, opts.c0, derive_key(cfg.seed, id, StreamRole::Input));
        std::vector<std::vector<double>> inputs{x.a, x.b};
        if (opts.preactivation_inputs)
            for (auto& v : inputs) {
                std::vector<double> y(v.size());
                apply_value(cfg.activation, v, y);
                v = std::move(y);
            }
        const std::uint64_t seeds[] = {derive_key(cfg.seed, id, StreamRole::MaskA),
                                       derive_key(cfg.seed, id, StreamRole::MaskB)};
        const InputTag tags[] = {InputTag::A, InputTag::B};
        const auto traces = forward_batch(net, inputs, seeds, tags);

        if (slots.count(Metric::QAA) || slots.count(Metric::CAB)) {
            const SignalMetrics sm = signal_metrics(traces[0], traces[1]);
            if (auto it = slots.find(Metric::QAA); it != slots.end()) it->second[i] = sm.q_aa;
            if (auto it = slots.find(Metric::CAB); it != slots.end()) it->second[i] = sm.c_ab;
        }
        if (need_grad) {
            const auto grads = backward_batch(net, traces);
            GradientMetrics gm = gradient_metrics(grads[0], grads[1]);
            if (auto it = slots.find(Metric::GAA); it != slots.end()) it->second[i] = std::move(gm.g_aa);
            if (auto it = slots.find(Metric::GAB); it != slots.end()) it->second[i] = std::move(gm.g_ab);
            if (auto it = slots.find(Metric::GTildeAB); it != slots.end()) it->second[i] = std::move(gm.g_tilde_ab);
        }
    };

    std::atomic<int> next{0};
    std::atomic<int> done{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                run_instance(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
            const int d = done.fetch_add(1) + 1;
            if (opts.progress) opts.progress(d, n);
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (const auto& [metric, samples] : slots) result.stats[metric] = reduce_samples(metric, samples);
    return result;
}

}  // namespace mfdl
