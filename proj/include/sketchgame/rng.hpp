#pragma once

#include <cstdint>
#include <random>

namespace sketchgame {

// splitmix64; used both as a hash and to seed per-purpose rng streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

inline Rng make_rng(std::uint64_t a, std::uint64_t b) { return Rng(hash_mix(a, b)); }

inline Rng make_rng(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return Rng(hash_mix(hash_mix(a, b), c));
}

// Uniform double in [0, 1).
inline double uniform(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int uniform_int(Rng& rng, int n) {
    return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

// Box-Muller without state so draws are platform-independent.
inline double gauss(Rng& rng) {
    double u1 = uniform(rng);
    double u2 = uniform(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace sketchgame
