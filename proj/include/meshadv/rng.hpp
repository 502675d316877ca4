#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace meshadv {

/// Deterministic random stream (xoshiro256++ seeded via splitmix64).
///
/// The standard library distributions are implementation-defined, so every
/// random draw in the project goes through this class to keep runs
/// bit-reproducible across compilers. Streams are derived from a global seed
/// plus integer tags, e.g. (globalSeed, instanceId, iteration).
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }

    /// Scalar seed of the stream identified by (seed, tags); Rng(derive_seed(...))
    /// and derive(...) produce identical streams.
    static std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
        std::uint64_t s = seed;
        for (std::uint64_t t : tags) {
            s ^= t + 0x9e3779b97f4a7c15ULL;
            s = splitmix64(s);
        }
        return s;
    }

    /// Derives an independent stream from a seed and a list of tags.
    static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
        return Rng(derive_seed(seed, tags));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Lemire rejection-free would bias slightly; plain rejection keeps it exact.
        const std::uint64_t limit = n * ((~0ULL) / n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
    double normal() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& s) {
        std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4];
};

}  // namespace meshadv
