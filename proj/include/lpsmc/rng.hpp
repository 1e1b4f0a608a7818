// rng.hpp
// Seedable, portable random number generation. The engine is xoshiro256++
// seeded through splitmix64; all variates are produced by inverse-CDF
// transforms of the raw uniform stream, so a given seed yields the same
// draws on every platform (up to libm rounding in log/pow).
//
// Stream splitting: replication r of a study uses the stream seed
// derive_stream(base_seed, r), a stateless splitmix64 finalizer applied to
// base_seed + (r+1) * golden-ratio increment. Streams for distinct r are
// statistically independent and reproducible.

#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include "lpsmc/numeric.hpp"

namespace lpsmc {

namespace detail {

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

inline std::uint64_t derive_stream(std::uint64_t base_seed, std::uint64_t index) {
    return detail::splitmix64_mix(base_seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

class Xoshiro256pp {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed) {
        std::uint64_t z = seed;
        for (auto& word : state_) {
            word = detail::splitmix64_mix(z);
            z = word;
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }

    result_type operator()() {
        const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform on the open interval (0,1); safe to feed into inverse CDFs.
    double uniform_open() {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return normal_quantile(uniform_open()); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::array<std::uint64_t, 4> state_;
};

}  // namespace lpsmc
