#pragma once

#include <cstdint>

namespace lowrank {

/// Counter-style splittable generator. Every draw is a pure function of the
/// evolving 64-bit state, and independent substreams are derived by mixing a
/// stream id into the seed, so parallel consumers stay reproducible no matter
/// how work is scheduled.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection-free modulo is fine here: n is tiny relative to 2^64.
        return next_u64() % n;
    }

    /// Derive a child seed for substream `stream` of `seed`.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ULL + stream * 0xD1B54A32D192ED03ULL));
        return g.next_u64();
    }

  private:
    std::uint64_t state_;
};

/// Standard normal via Box-Muller (deterministic, no cached spare).
double sample_normal(SplitMix64& rng);

/// Gamma(alpha, 1) via Marsaglia-Tsang, boosted for alpha < 1.
double sample_gamma(SplitMix64& rng, double alpha);

}  // namespace lowrank
