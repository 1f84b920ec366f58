#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace slim {

// xoshiro256** (Blackman & Vigna), seeded by expanding a 64-bit seed with
// SplitMix64. All derived draws below use fixed formulas so that a seed
// yields the same stream on every platform and standard library.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Uniform on [0, 1) with 53 random bits: (x >> 11) * 2^-53.
  double uniform();

  // Uniform on {0, ..., bound-1}; Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via Marsaglia's polar method; the spare value is cached.
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace slim
