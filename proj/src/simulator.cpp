#include "mfdl/simulator.hpp"

#include "mfdl/error.hpp"

#include <cmath>
#include <string>

namespace mfdl {

namespace {

// Four independent accumulators; the summation order is fixed so results are
// reproducible across runs and thread counts.
double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    for (; j < n; ++j) s0 += a[j] * b[j];
    return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

StreamRole mask_role(InputTag tag) { return tag == InputTag::A ? StreamRole::MaskA : StreamRole::MaskB; }

std::vector<std::uint8_t> draw_mask(std::uint64_t mask_seed, InputTag tag, int layer, int n, double rho) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 1);
    if (rho >= 1.0) return mask;
    Rng rng(derive_key(mask_seed, 0, mask_role(tag), static_cast<std::uint64_t>(layer)));
    for (auto& m : mask) m = rng.bernoulli(rho) ? 1 : 0;
    return mask;
}

// (p^l / rho) . y^{l-1}
std::vector<double> scaled_input(const ForwardTrace& t, int layer, ActivationKind a, double rho) {
    const std::vector<double>& prev = layer == 1 ? t.input : t.pre_activations[layer - 2];
    const auto& mask = t.masks[layer - 1];
    std::vector<double> out(prev.size());
    const double inv_rho = 1.0 / rho;
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (!mask[j]) continue;
        const double y = layer == 1 ? prev[j] : value(a, prev[j]);
        out[j] = y * inv_rho;
    }
    return out;
}

void check_trace(const NetworkInstance& net, const ForwardTrace& t) {
    const std::size_t n = static_cast<std::size_t>(net.width());
    const std::size_t depth = static_cast<std::size_t>(net.depth());
    bool ok = t.input.size() == n && t.pre_activations.size() == depth && t.masks.size() == depth;
    for (std::size_t l = 0; ok && l < depth; ++l) ok = t.pre_activations[l].size() == n && t.masks[l].size() == n;
    if (!ok) throw InvalidArgument("backward: trace does not match the network shape");
}

}  // namespace

void NetworkConfig::validate() const {
    if (depth < 1) throw InvalidArgument("network depth must be >= 1");
    if (width < 1) throw InvalidArgument("network width must be >= 1");
    params.validate();
}

NetworkInstance::NetworkInstance(const NetworkConfig& cfg, std::uint64_t instance, std::size_t cache_budget_bytes)
    : cfg_(cfg), instance_(instance) {
    cfg_.validate();
    const std::size_t n = static_cast<std::size_t>(cfg_.width);
    weight_sd_ = std::sqrt(cfg_.params.sigma_w_sq / cfg_.width);
    const double bias_sd = std::sqrt(cfg_.params.sigma_b_sq);

    biases_.resize(static_cast<std::size_t>(cfg_.depth));
    for (int l = 1; l <= cfg_.depth; ++l) {
        Rng rng(derive_key(cfg_.seed, instance_, StreamRole::Bias, static_cast<std::uint64_t>(l)));
        auto& b = biases_[l - 1];
        b.resize(n);
        rng.fill_normal(b, bias_sd);
    }

    const double bytes = static_cast<double>(cfg_.depth) * static_cast<double>(n) * static_cast<double>(n) * 8.0;
    if (bytes <= static_cast<double>(cache_budget_bytes)) {
        // Row-major fill from the layer stream gives the same values as the row-by-row path.
        cache_.resize(static_cast<std::size_t>(cfg_.depth));
        for (int l = 1; l <= cfg_.depth; ++l) {
            cache_[l - 1].resize(n * n);
            Rng rng(weight_key(l));
            rng.fill_normal(cache_[l - 1], weight_sd_);
        }
    }
}

void NetworkInstance::check_layer(int layer) const {
    if (layer < 1 || layer > cfg_.depth)
        throw InvalidArgument("layer " + std::to_string(layer) + " outside [1, " + std::to_string(cfg_.depth) + "]");
}

std::uint64_t NetworkInstance::weight_key(int layer) const {
    return derive_key(cfg_.seed, instance_, StreamRole::Weights, static_cast<std::uint64_t>(layer));
}

void NetworkInstance::fill_row(Rng& rng, std::span<double> row) const {
    rng.fill_normal(row, weight_sd_);
}

std::span<const double> NetworkInstance::bias(int layer) const {
    check_layer(layer);
    return biases_[layer - 1];
}

std::vector<double> NetworkInstance::weights(int layer) const {
    const std::size_t n = static_cast<std::size_t>(cfg_.width);
    std::vector<double> w(n * n);
    for_each_row(layer, [&](std::size_t i, std::span<const double> row) {
        std::copy(row.begin(), row.end(), w.begin() + static_cast<std::ptrdiff_t>(i * n));
    });
    return w;
}

NetworkInstance sample_network(const NetworkConfig& cfg, std::uint64_t instance, std::size_t cache_budget_bytes) {
    return NetworkInstance(cfg, instance, cache_budget_bytes);
}

InputPair sample_inputs(int width, double q0, double c0, std::uint64_t seed) {
    if (width < 1) throw InvalidArgument("sample_inputs: width must be >= 1");
    if (!(q0 > 0.0) || !std::isfinite(q0)) throw InvalidArgument("sample_inputs: q0 must be positive");
    if (!(std::abs(c0) <= 1.0)) throw InvalidArgument("sample_inputs: c0 must lie in [-1, 1]");
    const bool collinear = std::abs(c0) == 1.0;
    if (!collinear && width < 2) throw InvalidArgument("sample_inputs: width >= 2 needed for |c0| < 1");

    const std::size_t n = static_cast<std::size_t>(width);
    Rng rng(derive_key(seed, 0, StreamRole::Input));
    InputPair out;
    out.a.resize(n);
    for (auto& v : out.a) v = rng.normal();
    const double target = std::sqrt(q0 * width);
    const double na = std::sqrt(dot(out.a.data(), out.a.data(), n));
    for (auto& v : out.a) v *= target / na;

    if (collinear) {
        out.b = out.a;
        if (c0 < 0.0)
            for (auto& v : out.b) v = -v;
        return out;
    }

    std::vector<double> e(n);
    for (auto& v : e) v = rng.normal();
    // Two Gram-Schmidt passes keep the projection at rounding level.
    for (int pass = 0; pass < 2; ++pass) {
        const double proj = dot(e.data(), out.a.data(), n) / (target * target);
        for (std::size_t j = 0; j < n; ++j) e[j] -= proj * out.a[j];
    }
    const double ne = std::sqrt(dot(e.data(), e.data(), n));
    const double s = std::sqrt(1.0 - c0 * c0);
    out.b.resize(n);
    for (std::size_t j = 0; j < n; ++j) out.b[j] = c0 * out.a[j] + s * target * e[j] / ne;
    return out;
}

std::vector<ForwardTrace> forward_batch(const NetworkInstance& net, std::span<const std::vector<double>> inputs,
                                        std::span<const std::uint64_t> mask_seeds,
                                        std::span<const InputTag> tags) {
    const std::size_t k = inputs.size();
    if (mask_seeds.size() != k || tags.size() != k)
        throw InvalidArgument("forward_batch: inputs, mask seeds and tags differ in length");
    const int depth = net.depth();
    const int width = net.width();
    const std::size_t n = static_cast<std::size_t>(width);
    const double rho = net.config().params.rho;
    const ActivationKind act = net.config().activation;

    std::vector<ForwardTrace> traces(k);
    for (std::size_t b = 0; b < k; ++b) {
        if (inputs[b].size() != n) throw InvalidArgument("forward: input dimension does not match the width");
        traces[b].input_id = tags[b];
        traces[b].input = inputs[b];
        traces[b].pre_activations.resize(static_cast<std::size_t>(depth));
        traces[b].masks.resize(static_cast<std::size_t>(depth));
    }

    std::vector<std::vector<double>> a(k);
    for (int l = 1; l <= depth; ++l) {
        for (std::size_t b = 0; b < k; ++b) {
            traces[b].masks[l - 1] = draw_mask(mask_seeds[b], tags[b], l, width, rho);
            a[b] = scaled_input(traces[b], l, act, rho);
            traces[b].pre_activations[l - 1].assign(n, 0.0);
        }
        const auto bias = net.bias(l);
        net.for_each_row(l, [&](std::size_t i, std::span<const double> row) {
            for (std::size_t b = 0; b < k; ++b)
                traces[b].pre_activations[l - 1][i] = dot(row.data(), a[b].data(), n) + bias[i];
        });
    }
    return traces;
}

ForwardTrace forward(const NetworkInstance& net, std::span<const double> x, std::uint64_t mask_seed, InputTag tag) {
    const std::vector<double> in(x.begin(), x.end());
    auto traces = forward_batch(net, std::span(&in, 1), std::span(&mask_seed, 1), std::span(&tag, 1));
    return std::move(traces.front());
}

std::vector<GradientTrace> backward_batch(const NetworkInstance& net, std::span<const ForwardTrace> traces) {
    for (const auto& t : traces) check_trace(net, t);
    const std::size_t k = traces.size();
    const int depth = net.depth();
    const std::size_t n = static_cast<std::size_t>(net.width());
    const double rho = net.config().params.rho;
    const ActivationKind act = net.config().activation;

    std::vector<GradientTrace> grads(k);
    for (std::size_t b = 0; b < k; ++b) {
        auto& g = grads[b];
        g.deltas.resize(static_cast<std::size_t>(depth));
        g.input_scaled.resize(static_cast<std::size_t>(depth));
        for (int l = 1; l <= depth; ++l) g.input_scaled[l - 1] = scaled_input(traces[b], l, act, rho);
        auto& top = g.deltas[depth - 1];
        const auto& z = traces[b].pre_activations[depth - 1];
        top.resize(n);
        for (std::size_t i = 0; i < n; ++i) top[i] = 2.0 * z[i];
    }

    std::vector<std::vector<double>> back(k, std::vector<double>(n));
    const double inv_rho = 1.0 / rho;
    for (int l = depth; l >= 2; --l) {
        for (auto& v : back) std::fill(v.begin(), v.end(), 0.0);
        net.for_each_row(l, [&](std::size_t i, std::span<const double> row) {
            for (std::size_t b = 0; b < k; ++b) {
                const double d = grads[b].deltas[l - 1][i];
                if (d != 0.0) axpy(d, row.data(), back[b].data(), n);
            }
        });
        for (std::size_t b = 0; b < k; ++b) {
            const auto& z = traces[b].pre_activations[l - 2];
            const auto& mask = traces[b].masks[l - 1];
            auto& d = grads[b].deltas[l - 2];
            d.assign(n, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                if (mask[j]) d[j] = derivative(act, z[j]) * inv_rho * back[b][j];
        }
    }
    return grads;
}

GradientTrace backward(const NetworkInstance& net, const ForwardTrace& trace) {
    auto grads = backward_batch(net, std::span(&trace, 1));
    return std::move(grads.front());
}

double loss(const ForwardTrace& trace) {
    const auto& z = trace.pre_activations.back();
    return dot(z.data(), z.data(), z.size());
}

std::vector<double> GradientTrace::weight_grad(int layer) const {
    if (layer < 1 || layer > depth()) throw InvalidArgument("weight_grad: layer out of range");
    const auto& d = deltas[layer - 1];
    const auto& x = input_scaled[layer - 1];
    std::vector<double> g(d.size() * x.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) g[i * x.size() + j] = d[i] * x[j];
    return g;
}

GradientMetrics gradient_metrics(const GradientTrace& ga, const GradientTrace& gb) {
    if (ga.depth() != gb.depth()) throw InvalidArgument("gradient_metrics: traces differ in depth");
    GradientMetrics m;
    const std::size_t depth = static_cast<std::size_t>(ga.depth());
    m.g_aa.resize(depth);
    m.g_ab.resize(depth);
    m.g_tilde_ab.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& da = ga.deltas[l];
        const auto& db = gb.deltas[l];
        const auto& xa = ga.input_scaled[l];
        const auto& xb = gb.input_scaled[l];
        const std::size_t n = da.size();
        if (db.size() != n || xa.size() != xb.size())
            throw InvalidArgument("gradient_metrics: traces differ in width");
        const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(xa.size()));
        double daa = 0.0, dab = 0.0, dab_abs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            daa += da[i] * da[i];
            dab += da[i] * db[i];
            dab_abs += std::abs(da[i] * db[i]);
        }
        double xaa = 0.0, xab = 0.0, xab_abs = 0.0;
        for (std::size_t j = 0; j < xa.size(); ++j) {
            xaa += xa[j] * xa[j];
            xab += xa[j] * xb[j];
            xab_abs += std::abs(xa[j] * xb[j]);
        }
        // sum_ij (d_i x_j)(d'_i x'_j) factorizes into the two inner sums.
        m.g_aa[l] = norm * daa * xaa;
        m.g_ab[l] = std::abs(norm * dab * xab);
        m.g_tilde_ab[l] = norm * dab_abs * xab_abs;
    }
    return m;
}

SignalMetrics signal_metrics(const ForwardTrace& ta, const ForwardTrace& tb) {
    if (ta.pre_activations.size() != tb.pre_activations.size())
        throw InvalidArgument("signal_metrics: traces differ in depth");
    SignalMetrics m;
    const std::size_t depth = ta.pre_activations.size();
    m.q_aa.resize(depth);
    m.q_bb.resize(depth);
    m.c_ab.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& za = ta.pre_activations[l];
        const auto& zb = tb.pre_activations[l];
        const std::size_t n = za.size();
        if (zb.size() != n) throw InvalidArgument("signal_metrics: traces differ in width");
        const double qa = dot(za.data(), za.data(), n) / n;
        const double qb = dot(zb.data(), zb.data(), n) / n;
        const double qab = dot(za.data(), zb.data(), n) / n;
        m.q_aa[l] = qa;
        m.q_bb[l] = qb;
        // A zero-length layer has no direction; report zero correlation.
        m.c_ab[l] = (qa > 0.0 && qb > 0.0) ? qab / std::sqrt(qa * qb) : 0.0;
    }
    return m;
}

}  // namespace mfdl
