#pragma once

#include <cstdint>
#include <random>

namespace crowdswap {

/// The single generator type used everywhere a draw is needed.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double exponential(Rng& rng, double rate) {
    return std::exponential_distribution<double>(rate)(rng);
}

/// Derives an independent stream from a base seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace crowdswap
