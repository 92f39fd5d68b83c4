#pragma once

#include <cmath>
#include <cstdint>

namespace qcd {

/// splitmix64 finalizer; also the mixing function behind stream derivation.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27; z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

/// Counter-based stream split: the n-th derived seed of a master seed.
/// Pure function of (master, n), so work can be scheduled on any number of
/// workers without changing the streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t n) {
    return mix64(master + (n + 1) * 0x9E3779B97F4A7C15ULL);
}

/// xoshiro256++ with splitmix64 seeding. Small, fast, and good enough
/// statistically for the Monte Carlo estimators here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) {
            sm += 0x9E3779B97F4A7C15ULL;
            w = mix64(sm);
        }
    }

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

    /// Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1]; safe as a log() argument.
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = uniform_pos();
        double v = uniform();
        double r = std::sqrt(-2.0 * std::log(u));
        double phi = 6.283185307179586477 * v;
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// One standard normal fully determined by (seed, index). Used for
/// observation streams so that a sample at a given index does not depend on
/// which other indices were generated.
inline double indexed_normal(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t u1 = derive_seed(seed, 2 * index);
    std::uint64_t u2 = derive_seed(seed, 2 * index + 1);
    double u = static_cast<double>((u1 >> 11) + 1) * 0x1.0p-53;
    double v = static_cast<double>(u2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586477 * v);
}

}  // namespace qcd
