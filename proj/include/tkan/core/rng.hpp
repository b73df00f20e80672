// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tkan/core/tensor.hpp"

namespace tkan {

/**
 * PCG32 (XSH-RR variant, 64-bit LCG state, 32-bit output) after
 * M. E. O'Neill's reference implementation `pcg32_random_r`.
 *
 * The stream id selects one of 2^63 independent sequences for the same seed.
 * Output depends only on (seed, stream), never on the platform.
 */
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  /// 53-bit uniform double in [0, 1), built from two 32-bit draws.
  double next_unit();
  /// Uniform integer in [0, bound) without modulo bias.
  std::uint32_t next_below(std::uint32_t bound);

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
};

/// Uniform tensor in [low, high); deterministic in (seed, stream, shape).
Tensor rng_uniform(std::uint64_t seed, const Shape& shape, double low, double high,
                   std::uint64_t stream = 0);

/// Hands out one PCG stream per parameter tensor so that every tensor of a
/// model is reproducible from a single seed.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_stream() noexcept { return next_stream_++; }

  Tensor uniform(const Shape& shape, double low, double high);
  /// U(±√(6/(fan_in+fan_out))).
  Tensor glorot(std::size_t fan_in, std::size_t fan_out, const Shape& shape);

 private:
  std::uint64_t seed_;
  std::uint64_t next_stream_ = 0;
};

/// Fisher–Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, Pcg32& rng);

}  // namespace tkan
