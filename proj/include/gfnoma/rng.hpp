#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gfnoma {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream keys are hashed together so that (seed, a, b) and (seed, b, a) differ.
inline std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (auto id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    return h;
}

/// Independent generator for one logical stream, e.g. (seed, cell, trial).
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    return Rng(stream_key(seed, ids));
}

} // namespace gfnoma
