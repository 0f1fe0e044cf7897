#pragma once

#include <cstdint>
#include <random>

namespace qslab {

/// SplitMix64 finalizer; used only to derive substream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Engine used everywhere: std::mt19937_64.
///
/// Stream splitting: the substream for (seed, index) is an mt19937_64 seeded
/// with splitmix64(splitmix64(seed) ^ index). Every sample owns its substream,
/// so output does not depend on how samples are scheduled over threads.
using Engine = std::mt19937_64;

inline Engine substream(std::uint64_t seed, std::uint64_t index) {
    return Engine(splitmix64(splitmix64(seed) ^ index));
}

/// Uniform integer in [0, bound) by the 128-bit multiply-shift map.
inline std::uint64_t uniform_below(Engine& rng, std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * bound) >> 64);
}

/// Uniform double in the open interval (0,1).
inline double uniform_open(Engine& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace qslab
