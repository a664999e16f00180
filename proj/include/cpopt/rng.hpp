#pragma once

#include <cstdint>
#include <random>

namespace cpopt {

/// SplitMix64 finalizer; a bijective 64-bit mix.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent random streams addressed by (seed, path, lane).
///
/// Every path owns its own engine keyed by its index, so a path's draws do not
/// depend on how paths are scheduled across workers. Lane 0 feeds the change
/// point, lane 1 the Brownian increments.
enum class StreamLane : std::uint64_t { ChangePoint = 0, Brownian = 1 };

inline std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t path, StreamLane lane) {
  const std::uint64_t key =
      splitmix64(splitmix64(seed) ^ splitmix64(path * 2 + static_cast<std::uint64_t>(lane) + 1));
  return std::mt19937_64(key);
}

}  // namespace cpopt
