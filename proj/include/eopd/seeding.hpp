#pragma once

#include <cstdint>

namespace eopd {

// Deterministic stream splitting: splitmix64 of master advanced by
// (index + 1) increments. Used wherever one master seed must fan out into
// independent substreams (Monte-Carlo runs, loop noise sources).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace eopd
