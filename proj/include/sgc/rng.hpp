#pragma once

#include <cstdint>
#include <random>

namespace sgc {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to decorrelate (seed, index) pairs.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent stream for sample `index` of a run seeded with `seed`.
/// `lane` separates the streams of different models sharing one seed.
[[nodiscard]] inline Rng substream(std::uint64_t seed, std::uint64_t index, std::uint64_t lane = 0) {
  return Rng{mix64(mix64(mix64(seed) ^ lane) + index)};
}

/// Uniform double on [0, 1) with 53 random bits. Unlike
/// std::uniform_real_distribution the result is identical on every
/// standard library.
[[nodiscard]] inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Fair ±1.
[[nodiscard]] inline int random_sign(Rng& rng) { return (rng() >> 63) != 0 ? -1 : 1; }

}  // namespace sgc
