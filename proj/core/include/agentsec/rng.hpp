#pragma once

#include <cstdint>
#include <random>

namespace agentsec::rng {

// mt19937_64 has a standardized output sequence, so seeded draws replay
// bit-identically on every platform. The std::uniform_* distributions do not
// guarantee that, which is why the helpers below draw from the raw engine.
using Engine = std::mt19937_64;

// splitmix64 finalizer; used to derive independent streams from (seed, index).
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return mix(mix(a) ^ b);
}

inline Engine make_engine(std::uint64_t seed) {
    return Engine(mix(seed));
}

/// Uniform integer in [0, n) via rejection sampling (no modulo bias).
inline std::uint64_t bounded(Engine& eng, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = eng();
    while (v >= limit) v = eng();
    return v % n;
}

/// Uniform double in [0, 1) with 53 bits of precision.
inline double unit(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline bool chance(Engine& eng, double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return unit(eng) < p;
}

/// Uniform double in [-half_width, half_width]; used for weight init.
inline double symmetric(Engine& eng, double half_width) {
    return (unit(eng) * 2.0 - 1.0) * half_width;
}

} // namespace agentsec::rng
