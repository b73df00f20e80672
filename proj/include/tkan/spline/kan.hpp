// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tkan/core/tensor.hpp"

namespace tkan {

/**
 * Uniform knot vector for B-splines of degree `order` on
 * [domain_low, domain_high] split into `grid_size` intervals, extended by
 * `order` knots past each end at the same spacing.
 *
 * Knot j sits at domain_low + (j - order) * h with h = (high - low) / G,
 * j = 0 .. G + 2k. Basis function r is supported on [knot_r, knot_{r+k+1}).
 */
struct KnotGrid {
  double domain_low = -1.0;
  double domain_high = 1.0;
  std::size_t grid_size = 5;
  std::size_t order = 3;
  std::vector<double> knots;

  static KnotGrid uniform(double low, double high, std::size_t grid_size, std::size_t order);

  std::size_t num_basis() const noexcept { return grid_size + order; }
  double spacing() const noexcept {
    return (domain_high - domain_low) / static_cast<double>(grid_size);
  }

  bool operator==(const KnotGrid&) const = default;
};

/// Cox–de Boor values B_{r,k}(x) as a [len(x) × (G+k)] matrix.
Tensor bspline_basis(std::span<const double> x, const KnotGrid& grid);

/// Basis values and their x-derivatives for one point, written to `value`
/// and `slope` (each of length G+k). `scratch` must hold G+2k doubles.
void bspline_eval(double x, const KnotGrid& grid, std::span<double> value,
                  std::span<double> slope, std::span<double> scratch);

/**
 * One KAN layer: a [n_out × n_in] matrix of learnable univariate functions
 *   φ_{j,i}(x) = Σ_r c[j,i,r] B_r(x) + base[j,i] silu(x)
 * whose outputs are summed over i.
 */
struct KanLayer {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  KnotGrid grid;
  Tensor spline_coeffs;  // [n_out × n_in × (G+k)]
  Tensor base_weight;    // [n_out × n_in]
  bool use_base = true;
};

struct KanOptions {
  double domain_low = -1.0;
  double domain_high = 1.0;
  bool use_base = true;
};

/// Coefficients ~ U(±0.1/√(G+k)), base weights Glorot-uniform.
KanLayer kan_layer_init(std::size_t n_in, std::size_t n_out, std::size_t grid_size,
                        std::size_t order, std::uint64_t seed, const KanOptions& options = {},
                        std::uint64_t stream = 0);

/// y[b,j] = Σ_i φ_{j,i}(x[b,i]); differentiable in x, coefficients and base weights.
Tensor kan_layer_forward(const Tensor& x, const KanLayer& layer);

/// Applies `layers` in order (layer 0 first).
Tensor kan_stack_forward(const Tensor& x, std::span<const KanLayer> layers);

}  // namespace tkan
