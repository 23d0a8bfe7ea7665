#include "mfdl/rng.hpp"

#include <cmath>

namespace mfdl {

namespace {

constexpr int kStrips = 256;
constexpr double kTailStart = 3.6541528853610088;
constexpr double kStripArea = 0.00492867323399;

struct ZigguratTables {
    // x[0] is the pseudo-width of the base strip (area / f(r)); x[256] = 0.
    std::array<double, kStrips + 1> x{};
    std::array<double, kStrips + 1> f{};

    ZigguratTables() {
        const auto pdf = [](double v) { return std::exp(-0.5 * v * v); };
        x[0] = kStripArea / pdf(kTailStart);
        x[1] = kTailStart;
        for (int i = 2; i < kStrips; ++i) x[i] = std::sqrt(-2.0 * std::log(kStripArea / x[i - 1] + pdf(x[i - 1])));
        x[kStrips] = 0.0;
        for (int i = 0; i <= kStrips; ++i) f[i] = pdf(x[i]);
    }
};

const ZigguratTables& tables() {
    static const ZigguratTables t;
    return t;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::uint64_t instance, StreamRole role, std::uint64_t layer) {
    std::uint64_t s = seed;
    std::uint64_t k = splitmix64(s);
    s = k ^ instance;
    k = splitmix64(s);
    s = k ^ static_cast<std::uint64_t>(role);
    k = splitmix64(s);
    s = k ^ layer;
    return splitmix64(s);
}

Rng::Rng(std::uint64_t key) {
    std::uint64_t sm = key;
    for (auto& w : s_) w = splitmix64(sm);
}

// Finishes a draw whose first candidate fell outside the strip's inner box.
double Rng::normal_slow(std::uint64_t bits) {
    const ZigguratTables& t = tables();
    for (;;) {
        const int i = static_cast<int>(bits & 0xff);
        // Signed uniform in [-1, 1) from the top 53 bits, disjoint from the strip index.
        const double u = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
        const double x = u * t.x[i];
        if (std::abs(x) < t.x[i + 1]) return x;
        if (i == 0) {
            double xx, yy;
            do {
                xx = -std::log(uniform_open()) / kTailStart;
                yy = -std::log(uniform_open());
            } while (2.0 * yy < xx * xx);
            return u < 0.0 ? -(kTailStart + xx) : kTailStart + xx;
        }
        if (t.f[i + 1] + uniform() * (t.f[i] - t.f[i + 1]) < std::exp(-0.5 * x * x)) return x;
        bits = next_u64();
    }
}

double Rng::normal() { return normal_slow(next_u64()); }

void Rng::fill_normal(std::span<double> out, double scale) {
    const ZigguratTables& t = tables();
    for (double& v : out) {
        const std::uint64_t bits = next_u64();
        const int i = static_cast<int>(bits & 0xff);
        const double x = (2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0) * t.x[i];
        v = scale * (std::abs(x) < t.x[i + 1] ? x : normal_slow(bits));
    }
}

}  // namespace mfdl
