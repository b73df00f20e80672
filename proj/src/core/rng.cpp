// SPDX-License-Identifier: Apache-2.0
#include "tkan/core/rng.hpp"

#include <cmath>
#include <numeric>

#include "tkan/core/errors.hpp"

namespace tkan {

namespace {
constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
}

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) : inc_((stream << 1u) | 1u) {
  next_u32();
  state_ += seed;
  next_u32();
}

std::uint32_t Pcg32::next_u32() {
  const std::uint64_t old = state_;
  state_ = old * kMultiplier + inc_;
  const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  const auto rot = static_cast<std::uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

double Pcg32::next_unit() {
  const std::uint64_t hi = next_u32() >> 5;  // 27 bits
  const std::uint64_t lo = next_u32() >> 6;  // 26 bits
  return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
}

std::uint32_t Pcg32::next_below(std::uint32_t bound) {
  // Rejection on the low residue class, as in pcg32_boundedrand_r.
  const std::uint32_t threshold = (0u - bound) % bound;
  for (;;) {
    const std::uint32_t r = next_u32();
    if (r >= threshold) return r % bound;
  }
}

Tensor rng_uniform(std::uint64_t seed, const Shape& shape, double low, double high,
                   std::uint64_t stream) {
  if (!(low < high)) {
    throw ContractError("rng_uniform: requires low < high (got low=" + std::to_string(low) +
                        ", high=" + std::to_string(high) + ")");
  }
  Pcg32 rng(seed, stream);
  std::vector<double> values(shape_size(shape));
  const double width = high - low;
  for (auto& v : values) {
    v = low + width * rng.next_unit();
    if (v >= high) v = low;  // rounding can land on `high` when width is tiny
  }
  return Tensor(shape, std::move(values));
}

Tensor Initializer::uniform(const Shape& shape, double low, double high) {
  return rng_uniform(seed_, shape, low, high, next_stream());
}

Tensor Initializer::glorot(std::size_t fan_in, std::size_t fan_out, const Shape& shape) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform(shape, -bound, bound);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Pcg32& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = rng.next_below(static_cast<std::uint32_t>(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace tkan
