#pragma once

#include <cstdint>
#include <random>

namespace spare {

using Rng = std::mt19937_64;

/// Named RNG streams. Every consumer draws from its own stream so adding
/// draws in one place never shifts the numbers seen somewhere else.
enum class Stream : std::uint64_t {
  bank_rotation = 1,
  synthetic_noise = 2,
  init = 3,
  shuffle = 4,
  sampler = 5,
  kmeans = 6,
  cmnist_split = 7,
  cmnist_color = 8,
  gdro = 9,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t sub = 0) {
  return Rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream) * 0x100000001b3ULL + sub)));
}

}  // namespace spare
