#pragma once

#include <cstdint>
#include <random>

namespace qcdnet {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic child seed for (master, a, b). Distinct tuples give
/// statistically independent engines.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(master) ^ a) + 0x632be59bd9b4e019ULL * (b + 1));
}

// Tags used with derive_seed so that different consumers of one master seed
// never share a stream.
namespace stream_tag {
inline constexpr std::uint64_t nature = 0x6e61747572ULL;
inline constexpr std::uint64_t network = 0x6e6574776fULL;
inline constexpr std::uint64_t sojourn = 0x736f6a6f75ULL;
inline constexpr std::uint64_t calibration = 0x63616c6962ULL;
inline constexpr std::uint64_t estimation = 0x657374696dULL;
} // namespace stream_tag

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Independent random sources of one Monte Carlo episode. Change time and
/// sensor observations come from `nature`; contention outcomes from
/// `network`. Keeping them apart lets a test hold one fixed while varying
/// the other.
struct EpisodeStreams {
    Rng nature;
    Rng network;

    static EpisodeStreams for_episode(std::uint64_t master_seed, std::uint64_t episode);
};

} // namespace qcdnet
