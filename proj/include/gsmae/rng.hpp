#pragma once

#include <cstdint>
#include <random>

namespace gsmae {

// All randomness flows through explicitly seeded mt19937_64 generators so
// that any run is reproducible from its recorded seeds.
using Rng = std::mt19937_64;

// Deterministic seed derivation (splitmix64 finalizer). Used to fan a base
// seed out into per-object / per-epoch / per-step streams without sharing
// generator state.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull + (b << 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return mix_seed(mix_seed(a, b, c), d);
}

// Bounded draw that does not depend on the standard library's
// distribution implementations (those vary across toolchains).
inline std::uint64_t draw_below(Rng& gen, std::uint64_t n) {
    return n == 0 ? 0 : gen() % n;
}

// Uniform double in [0, 1).
inline double draw_unit(Rng& gen) {
    return static_cast<double>(gen() >> 11) * (1.0 / 9007199254740992.0);
}

// Uniform double in [lo, hi).
inline double draw_range(Rng& gen, double lo, double hi) {
    return lo + (hi - lo) * draw_unit(gen);
}

// Standard normal via Box-Muller (deterministic across platforms).
inline double draw_normal(Rng& gen) {
    double u1 = draw_unit(gen);
    double u2 = draw_unit(gen);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

} // namespace gsmae
