#pragma once

// Counter-based random numbers: every draw is a pure function of a key
// tuple, so path generation is order-independent, parallelizable, and
// bit-reproducible.  splitmix64 is used as the mixing function and
// Box-Muller converts two mixed words into a standard normal.

#include <cmath>
#include <cstdint>

namespace spde {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Chain-mix a 4-word key into one state word.
inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                             std::uint64_t d) {
    std::uint64_t h = splitmix64(a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    h = splitmix64(h ^ d);
    return h;
}

// Uniform in (0, 1]: never returns 0, so log() below is always finite.
inline double u64_to_unit_open(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 1.0) * (1.0 / 9007199254740992.0);
}

// Uniform in [0, 1).
inline double u64_to_unit_half(std::uint64_t x) {
    return static_cast<double>(x >> 11) * (1.0 / 9007199254740992.0);
}

// Standard normal draw addressed by a 4-word key.
inline double normal_at(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                        std::uint64_t d) {
    std::uint64_t s = mix_key(a, b, c, d);
    const std::uint64_t w1 = splitmix64(s);
    const std::uint64_t w2 = splitmix64(s + 0x9E3779B97F4A7C15ULL);
    const double u1 = u64_to_unit_open(w1);
    const double u2 = u64_to_unit_half(w2);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Uniform in [0, 1) addressed by a 4-word key.
inline double uniform_at(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                         std::uint64_t d) {
    return u64_to_unit_half(splitmix64(mix_key(a, b, c, d)));
}

} // namespace spde
