#pragma once

#include <cstdint>
#include <random>

namespace jsms {

// Deterministic helpers on top of mt19937. std::uniform_*_distribution is
// implementation-defined, so all draws go through these to keep datasets and
// checkpoints bit-identical across platforms.

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for the i-th independent stream derived from a base seed.
inline uint64_t stream_seed(uint64_t base, uint64_t i) {
    return splitmix64(base ^ splitmix64(i + 1));
}

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(static_cast<std::mt19937::result_type>(seed)) {}

    uint32_t next_u32() { return gen_(); }

    /// Uniform float in [0, 1), 24 bits of mantissa.
    float uniform() { return static_cast<float>(gen_() >> 8) * 0x1p-24f; }

    double uniform64() { return static_cast<double>(gen_() >> 8) * 0x1p-24; }

    /// Uniform in [lo, hi).
    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0. Slightly biased for huge n,
    /// irrelevant at the ranges used here.
    int64_t below(int64_t n) { return static_cast<int64_t>(gen_() % static_cast<uint32_t>(n)); }

    /// Uniform integer in [lo, hi] inclusive.
    int64_t range(int64_t lo, int64_t hi) { return lo + below(hi - lo + 1); }

    bool coin() { return (gen_() & 1u) != 0; }

    /// Standard normal via Box-Muller (deterministic, no distribution objects).
    float normal() {
        float u1 = uniform();
        float u2 = uniform();
        if (u1 < 1e-12f) u1 = 1e-12f;
        return std::sqrt(-2.0f * std::log(u1)) * std::cos(6.2831853071795865f * u2);
    }

private:
    std::mt19937 gen_;
};

}  // namespace jsms
