#pragma once

#include <cstdint>
#include <random>

namespace godin {

using Rng = std::mt19937_64;

// splitmix64 finalizer; mixes a base seed with a stream label so that
// independent consumers (data classes, epochs, sweep points) never share a
// sequence.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream labels used across the project.
namespace streams {
inline constexpr std::uint64_t kBench = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kDropout = 4;
inline constexpr std::uint64_t kSweep = 5;
}  // namespace streams

}  // namespace godin
