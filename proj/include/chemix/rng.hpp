// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace chemix {

/// SplitMix64 generator (Steele, Lea, Flood 2014). Chosen over std::mt19937
/// because its output is fully pinned by the algorithm: the same seed yields
/// the same stream on every platform and in every language, which is what
/// makes dataset splits and parameter initialization reproducible outside
/// this codebase.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Unbiased integer in [0, n) by rejection sampling, n >= 1.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t bound = n == 0 ? 0 : (0ULL - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= bound) return r % n;
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

 private:
  std::uint64_t state_;
};

/// Fisher-Yates shuffle with the fixed draw order (i = n-1 .. 1,
/// j = next_below(i+1)). The procedure, not just the generator, is part of
/// the reproducibility contract.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace chemix
