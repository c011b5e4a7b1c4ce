#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace covert {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used as the mixing step for stream derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a root seed and a path of task indices.
/// Counter-based: the child depends only on (seed, path), never on how many
/// draws other streams consumed, so tasks can run in any order.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = splitmix64(seed);
  for (auto idx : path) s = splitmix64(s ^ splitmix64(idx + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return Rng{derive_seed(seed, path)};
}

}  // namespace covert
