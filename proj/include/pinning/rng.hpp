#pragma once

#include <cstdint>
#include <random>

namespace pinning {

/// SplitMix64 finaliser; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based seed splitting: one master seed, a stage tag and a counter map to
/// a reproducible stream seed independent of evaluation order.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stage, std::uint64_t counter = 0) {
    return mix64(mix64(master ^ mix64(stage + 0x632be59bd9b4e019ULL)) + counter);
}

enum class Stage : std::uint64_t {
    Obstacles = 1,
    Percolation = 2,
    TailStatistics = 3,
    Expectation = 4,
    Homogenization = 5,
    Tests = 99,
};

inline std::mt19937_64 make_rng(std::uint64_t master, Stage stage, std::uint64_t counter = 0) {
    return std::mt19937_64(stream_seed(master, static_cast<std::uint64_t>(stage), counter));
}

}  // namespace pinning
