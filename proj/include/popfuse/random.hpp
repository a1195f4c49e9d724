#pragma once

#include <cstdint>
#include <random>

namespace popfuse {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for an independent stream that depends only on (seed, replica, substream).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t replica,
                                    std::uint64_t substream = 0) noexcept {
  return splitmix64(seed ^ splitmix64(replica) ^ splitmix64(~substream));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t replica, std::uint64_t substream = 0) {
  return Rng(stream_seed(seed, replica, substream));
}

}  // namespace popfuse
