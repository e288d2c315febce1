#pragma once

// Counter-based random numbers: every draw is a pure function of a 64-bit
// seed and a 4-word counter, so any (stream, t, l, m) coordinate can be
// regenerated independently and in any order.

#include <array>
#include <cmath>
#include <cstdint>

namespace hetrrm::rng {

// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as easy
// as 1, 2, 3").
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::uint64_t seed) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  std::uint32_t k0 = static_cast<std::uint32_t>(seed);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0, static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1, static_cast<std::uint32_t>(p0)};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return ctr;
}

// Named streams keep unrelated uses of one seed apart.
enum class Stream : std::uint32_t {
  subframe_channel = 1,
  estimation_channel = 2,
  pattern_choice = 3,
  shadowing = 4,
  validation_channel = 5,
};

// Uniform on (0, 1], 53 bits of resolution.
inline double uniform(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint32_t b = 0,
                      std::uint32_t c = 0) {
  const std::uint32_t hi_word = static_cast<std::uint32_t>(a >> 32);
  const std::uint32_t lo_word = static_cast<std::uint32_t>(a);
  // Stream and the high part of `a` share a word; `a` stays below 2^48 in
  // practice (subframe indices).
  const auto out = philox4x32({lo_word, b, c, (static_cast<std::uint32_t>(stream) << 16) ^ hi_word}, seed);
  const std::uint64_t bits = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

// Unit-mean exponential, i.e. |h|^2 for unit-power Rayleigh fading.
inline double unit_exponential(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint32_t b,
                               std::uint32_t c) {
  return -std::log(uniform(seed, stream, a, b, c));
}

// Standard normal via Box-Muller on two coordinates of the same counter.
inline double standard_normal(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint32_t b = 0) {
  const double u1 = uniform(seed, stream, a, b, 0);
  const double u2 = uniform(seed, stream, a, b, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace hetrrm::rng
