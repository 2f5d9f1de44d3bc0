#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ddqn {

using Rng = std::mt19937_64;

// Independent consumers of randomness within one training run.
enum class Stream : std::uint64_t {
    Init = 1,
    EnvStart = 2,
    Exploration = 3,
    Dropout = 4,
    Replay = 5,
    Synthetic = 6,
};

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// A master seed fans out into one generator per stream, so adding draws in
// one consumer leaves the others untouched.
inline Rng make_stream(std::uint64_t master_seed, Stream stream, std::uint64_t salt = 0) {
    const auto s = mix64(mix64(master_seed) ^ mix64(static_cast<std::uint64_t>(stream) * 0x100000001B3ULL + salt));
    return Rng{s};
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection, independent of the standard
// library's distribution implementation.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

// Standard normal via Box-Muller; one variate per call.
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
}

} // namespace ddqn
