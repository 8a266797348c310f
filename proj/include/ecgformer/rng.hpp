#pragma once

// Stateless RNG derivation. Every randomized step draws from a generator
// derived from (seed, stream tags) rather than from one mutating global
// stream, so interrupted and resumed runs sample identically.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace ecgformer {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

inline uint64_t hash_str(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

// Generator for a named stream, e.g. derive_rng(seed, "crop", epoch, index).
inline std::mt19937 derive_rng(uint64_t seed, const std::string& tag,
                               uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = hash_combine(seed, hash_str(tag));
    h = hash_combine(h, a);
    h = hash_combine(h, b);
    return std::mt19937(static_cast<uint32_t>(h ^ (h >> 32)));
}

// Uniform integer in [0, n). Written out here because the distribution
// classes in <random> are not pinned across standard libraries.
inline uint64_t rng_index(std::mt19937& rng, uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t hi = rng(), lo = rng();
    return ((hi << 32) | lo) % n;
}

inline double rng_uniform(std::mt19937& rng, double lo, double hi) {
    const double u = rng() * (1.0 / 4294967296.0);
    return lo + u * (hi - lo);
}

// Standard normal via Box-Muller, one draw per call (the cosine branch).
inline double rng_gauss(std::mt19937& rng) {
    double u1 = (rng() + 1.0) * (1.0 / 4294967297.0);
    double u2 = rng() * (1.0 / 4294967296.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace ecgformer
