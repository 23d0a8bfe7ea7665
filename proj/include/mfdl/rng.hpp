#pragma once

// Portable random streams for the simulator.
//
// Every stream is a xoshiro256++ generator whose 256-bit state is filled by
// SplitMix64 from a 64-bit key. Keys are derived by chaining SplitMix64 over
// (seed, instance, role, layer), so any (instance, role, layer) stream can be
// regenerated independently and in any order. Normals use a 256-strip
// Marsaglia-Tsang ziggurat.

#include <array>
#include <cstdint>
#include <span>

namespace mfdl {

enum class StreamRole : std::uint64_t { Weights = 1, Bias = 2, MaskA = 3, MaskB = 4, Input = 5 };

/// One SplitMix64 step: advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Key of the stream for (seed, instance, role, layer).
std::uint64_t derive_key(std::uint64_t seed, std::uint64_t instance, StreamRole role, std::uint64_t layer = 0);

class Rng {
  public:
    explicit Rng(std::uint64_t key);

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1), safe for log.
    double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    double normal();

    /// out[i] = scale * normal(), consuming the stream exactly as repeated calls would.
    void fill_normal(std::span<double> out, double scale = 1.0);

  private:
    double normal_slow(std::uint64_t bits);
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_{};
};

}  // namespace mfdl
