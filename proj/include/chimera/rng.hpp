#pragma once

#include <cstdint>
#include <initializer_list>

#include "chimera/math.hpp"

namespace chimera {

/// splitmix64, used for seeding and for deriving sub-streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256** with a splitmix64-expanded seed. Portable and fully
/// deterministic across platforms; all experiments draw through this.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform angle in [0, 2*pi).
    double angle() { return uniform(0.0, two_pi); }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

/// Derives the seed of an independent sub-stream from a base seed and a
/// path of indices, e.g. (experiment id, epsilon index, seed index).
/// Sweep workers use this so results do not depend on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t state = base ^ 0xa0761d6478bd642fULL;
    std::uint64_t h = splitmix64(state);
    for (std::uint64_t p : path) {
        state ^= p + 0x9e3779b97f4a7c15ULL;
        h ^= splitmix64(state);
        h *= 0x2545f4914f6cdd1dULL;
        h ^= h >> 32;
    }
    return h;
}

}  // namespace chimera
