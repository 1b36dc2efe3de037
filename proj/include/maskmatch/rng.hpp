#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace maskmatch {

// Deterministic random number generation. The training pipeline derives an
// independent stream per (seed, purpose, step, sample) so that enabling or
// disabling one branch never shifts the draws seen by another. Generators are
// hand-rolled (splitmix64 seeding a xoshiro256++ core) so sequences are
// reproducible bit-for-bit regardless of the standard library.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a over a string tag, used to name rng streams.
inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    // Derive an independent stream from (seed, tag, a, b).
    static Rng stream(std::uint64_t seed, std::string_view tag,
                      std::uint64_t a = 0, std::uint64_t b = 0) {
        std::uint64_t sm = seed;
        sm = splitmix64(sm) ^ hash_tag(tag);
        sm = splitmix64(sm) ^ a;
        sm = splitmix64(sm) ^ b;
        return Rng(splitmix64(sm));
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

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1.
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection-free would bias; rejection loop terminates fast for n << 2^64.
        const std::uint64_t limit = ~0ULL - (~0ULL % n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (no state caching, one pair per call).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4]{};
};

}  // namespace maskmatch
