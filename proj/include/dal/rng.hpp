#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dal {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Child seed for a named stream. Derivation depends only on the inputs, so
/// concurrently generated episodes or maps never share state.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

enum class Stream : std::uint64_t {
  Maze = 1,
  Texture = 2,
  Perturb = 3,
  Spawn = 4,
  Motion = 5,
  Sensor = 6,
  Dataset = 7,
  Policy = 8,
};

inline std::uint64_t stream_seed(std::uint64_t root, Stream s, std::uint64_t index = 0) {
  return derive_seed(root, {static_cast<std::uint64_t>(s), index});
}

}  // namespace dal
