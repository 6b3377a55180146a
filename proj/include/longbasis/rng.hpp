#pragma once

#include <cstdint>
#include <random>

namespace longbasis {

using Engine = std::mt19937_64;

// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Seed of child stream `index` under `parent`. Children of distinct indices
// are decorrelated and do not depend on the order in which they are created.
constexpr std::uint64_t child_seed(std::uint64_t parent, std::uint64_t index) {
    return mix64(mix64(parent) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

inline Engine make_stream(std::uint64_t parent, std::uint64_t index) {
    return Engine(child_seed(parent, index));
}

} // namespace longbasis
