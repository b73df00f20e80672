// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tkan/core/rng.hpp"
#include "tkan/recurrent/cells.hpp"

namespace testing_support {

// Replaces every listed parameter with U(-bound, bound) draws.
inline void randomize(std::vector<tkan::NamedParam>& params, std::uint64_t seed, double bound) {
  for (std::size_t p = 0; p < params.size(); ++p) {
    *params[p].tensor = tkan::rng_uniform(seed, params[p].tensor->shape(), -bound, bound, 1000 + p);
  }
}

inline tkan::Tensor with_value(const tkan::Tensor& t, std::size_t index, double value) {
  std::vector<double> v(t.values().begin(), t.values().end());
  v[index] = value;
  return tkan::Tensor(t.shape(), std::move(v));
}

struct FdResult {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor). The floor sits well above the roundoff of a
// central difference (about eps·|loss|/h) so near-zero gradients do not read
// as large relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of `loss` with respect to every entry of every tensor.
inline FdResult finite_difference_check(const std::function<double()>& loss,
                                        const std::vector<tkan::NamedParam>& params,
                                        const std::vector<tkan::Tensor>& grads, double h = 1e-5) {
  FdResult out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const tkan::Tensor original = *params[p].tensor;
    for (std::size_t i = 0; i < original.size(); ++i) {
      *params[p].tensor = with_value(original, i, original[i] + h);
      const double up = loss();
      *params[p].tensor = with_value(original, i, original[i] - h);
      const double down = loss();
      *params[p].tensor = original;
      const double err = relative_error(grads[p][i], (up - down) / (2.0 * h));
      ++out.checked;
      if (err > out.worst) {
        out.worst = err;
        out.where = params[p].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

}  // namespace testing_support
