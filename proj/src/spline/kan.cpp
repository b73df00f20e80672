// SPDX-License-Identifier: Apache-2.0
#include "tkan/spline/kan.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "tkan/core/errors.hpp"
#include "tkan/core/ops.hpp"
#include "tkan/core/rng.hpp"

namespace tkan {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

namespace {

// 0/0 in the recursion is taken as 0.
double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double sigmoid_of(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

KnotGrid KnotGrid::uniform(double low, double high, std::size_t grid_size, std::size_t order) {
  if (grid_size == 0) throw ContractError("KnotGrid: grid_size must be >= 1");
  if (!(low < high)) throw ContractError("KnotGrid: domain_low must be < domain_high");
  KnotGrid g;
  g.domain_low = low;
  g.domain_high = high;
  g.grid_size = grid_size;
  g.order = order;
  const double h = g.spacing();
  const std::size_t n = grid_size + 2 * order + 1;
  g.knots.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    g.knots[j] = low + (static_cast<double>(j) - static_cast<double>(order)) * h;
  }
  return g;
}

void bspline_eval(double x, const KnotGrid& grid, std::span<double> value,
                  std::span<double> slope, std::span<double> scratch) {
  const auto& t = grid.knots;
  const std::size_t k = grid.order;
  const std::size_t nb = grid.num_basis();
  const std::size_t intervals = t.size() - 1;  // G + 2k
  std::fill(value.begin(), value.begin() + static_cast<std::ptrdiff_t>(nb), 0.0);
  std::fill(slope.begin(), slope.begin() + static_cast<std::ptrdiff_t>(nb), 0.0);
  // Only the k+1 functions supported on the knot span holding x are nonzero.
  const auto it = std::upper_bound(t.begin(), t.end(), x);
  if (it == t.begin() || it == t.end()) return;
  const auto span = static_cast<std::size_t>(it - t.begin()) - 1;
  std::fill(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(intervals), 0.0);
  scratch[span] = 1.0;
  if (k == 0) {
    if (span < nb) value[span] = 1.0;
    return;
  }
  for (std::size_t p = 1; p < k; ++p) {
    for (std::size_t j = span >= p ? span - p : 0; j <= span && j + p < intervals; ++j) {
      scratch[j] = safe_ratio(x - t[j], t[j + p] - t[j]) * scratch[j] +
                   safe_ratio(t[j + p + 1] - x, t[j + p + 1] - t[j + 1]) * scratch[j + 1];
    }
  }
  const double kk = static_cast<double>(k);
  for (std::size_t r = span >= k ? span - k : 0; r <= span && r < nb; ++r) {
    value[r] = safe_ratio(x - t[r], t[r + k] - t[r]) * scratch[r] +
               safe_ratio(t[r + k + 1] - x, t[r + k + 1] - t[r + 1]) * scratch[r + 1];
    slope[r] = safe_ratio(kk, t[r + k] - t[r]) * scratch[r] -
               safe_ratio(kk, t[r + k + 1] - t[r + 1]) * scratch[r + 1];
  }
}

Tensor bspline_basis(std::span<const double> x, const KnotGrid& grid) {
  const std::size_t nb = grid.num_basis();
  std::vector<double> out(x.size() * nb);
  std::vector<double> slope(nb), scratch(grid.knots.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    bspline_eval(x[i], grid, std::span<double>(out).subspan(i * nb, nb), slope, scratch);
  }
  return Tensor({x.size(), nb}, std::move(out));
}

KanLayer kan_layer_init(std::size_t n_in, std::size_t n_out, std::size_t grid_size,
                        std::size_t order, std::uint64_t seed, const KanOptions& options,
                        std::uint64_t stream) {
  if (n_in == 0 || n_out == 0) throw ContractError("kan_layer_init: n_in and n_out must be >= 1");
  if (grid_size == 0) throw ContractError("kan_layer_init: grid_size must be >= 1");
  if (order > 8) throw ContractError("kan_layer_init: spline order above 8 is not supported");
  KanLayer layer;
  layer.n_in = n_in;
  layer.n_out = n_out;
  layer.use_base = options.use_base;
  layer.grid = KnotGrid::uniform(options.domain_low, options.domain_high, grid_size, order);
  const std::size_t nb = layer.grid.num_basis();
  const double coeff_bound = 0.1 / std::sqrt(static_cast<double>(nb));
  layer.spline_coeffs =
      rng_uniform(seed, {n_out, n_in, nb}, -coeff_bound, coeff_bound, 2 * stream);
  const double glorot = std::sqrt(6.0 / static_cast<double>(n_in + n_out));
  layer.base_weight = rng_uniform(seed, {n_out, n_in}, -glorot, glorot, 2 * stream + 1);
  return layer;
}

Tensor kan_layer_forward(const Tensor& x, const KanLayer& layer) {
  if (x.rank() != 2 || x.dim(1) != layer.n_in) {
    throw DimensionError("kan_layer_forward: input " + shape_string(x.shape()) +
                         " does not match layer with n_in=" + std::to_string(layer.n_in));
  }
  const std::size_t nb = layer.grid.num_basis();
  if (layer.spline_coeffs.shape() != Shape{layer.n_out, layer.n_in, nb} ||
      layer.base_weight.shape() != Shape{layer.n_out, layer.n_in}) {
    throw DimensionError("kan_layer_forward: parameter shapes " +
                         shape_string(layer.spline_coeffs.shape()) + ", " +
                         shape_string(layer.base_weight.shape()) +
                         " do not match the layer description");
  }
  const std::size_t batch = x.dim(0), n_in = layer.n_in, n_out = layer.n_out;
  const std::size_t width = n_in * nb;

  auto basis = std::make_shared<std::vector<double>>(batch * width);
  auto slope = std::make_shared<std::vector<double>>(batch * width);
  auto act = std::make_shared<std::vector<double>>(batch * n_in, 0.0);
  std::vector<double> scratch(layer.grid.knots.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n_in; ++i) {
      const double v = x[b * n_in + i];
      const std::size_t off = b * width + i * nb;
      bspline_eval(v, layer.grid, std::span<double>(*basis).subspan(off, nb),
                   std::span<double>(*slope).subspan(off, nb), scratch);
      if (layer.use_base) (*act)[b * n_in + i] = v * sigmoid_of(v);
    }
  }

  const auto eb = static_cast<Eigen::Index>(batch);
  const auto ew = static_cast<Eigen::Index>(width);
  const auto ein = static_cast<Eigen::Index>(n_in);
  const auto eout = static_cast<Eigen::Index>(n_out);

  std::vector<double> out(batch * n_out);
  MutMap y(out.data(), eb, eout);
  y.noalias() = ConstMap(basis->data(), eb, ew) *
                ConstMap(layer.spline_coeffs.data(), eout, ew).transpose();
  if (layer.use_base) {
    y.noalias() += ConstMap(act->data(), eb, ein) *
                   ConstMap(layer.base_weight.data(), eout, ein).transpose();
  }

  const bool use_base = layer.use_base;
  return detail::make_result(
      {batch, n_out}, std::move(out), {&x, &layer.spline_coeffs, &layer.base_weight},
      [x = x.detached(), coeffs = layer.spline_coeffs.detached(),
       base = layer.base_weight.detached(), basis, slope, act, use_base, eb, ew, ein, eout,
       nb](std::span<const double> g, std::span<const std::span<double>> in) {
        ConstMap gy(g.data(), eb, eout);
        if (!in[0].empty()) {
          // dL/dx[b,i] = Σ_r (gy·C)[b,i,r] B'_r(x[b,i]) + (gy·base)[b,i] silu'(x[b,i])
          RowMatrix through_coeffs = gy * ConstMap(coeffs.data(), eout, ew);
          RowMatrix through_base;
          if (use_base) through_base = gy * ConstMap(base.data(), eout, ein);
          for (Eigen::Index b = 0; b < eb; ++b) {
            for (Eigen::Index i = 0; i < ein; ++i) {
              double acc = 0.0;
              const std::size_t off = static_cast<std::size_t>(b * ew + i * static_cast<Eigen::Index>(nb));
              for (std::size_t r = 0; r < nb; ++r) {
                acc += through_coeffs(b, i * static_cast<Eigen::Index>(nb) + static_cast<Eigen::Index>(r)) *
                       (*slope)[off + r];
              }
              if (use_base) {
                const double v = x[static_cast<std::size_t>(b * ein + i)];
                const double s = sigmoid_of(v);
                acc += through_base(b, i) * s * (1.0 + v * (1.0 - s));
              }
              in[0][static_cast<std::size_t>(b * ein + i)] += acc;
            }
          }
        }
        if (!in[1].empty()) {
          MutMap(in[1].data(), eout, ew).noalias() +=
              gy.transpose() * ConstMap(basis->data(), eb, ew);
        }
        if (!in[2].empty() && use_base) {
          MutMap(in[2].data(), eout, ein).noalias() +=
              gy.transpose() * ConstMap(act->data(), eb, ein);
        }
      });
}

Tensor kan_stack_forward(const Tensor& x, std::span<const KanLayer> layers) {
  for (std::size_t l = 1; l < layers.size(); ++l) {
    if (layers[l - 1].n_out != layers[l].n_in) {
      throw DimensionError("kan_stack_forward: layer " + std::to_string(l - 1) + " emits " +
                           std::to_string(layers[l - 1].n_out) + " values but layer " +
                           std::to_string(l) + " expects " + std::to_string(layers[l].n_in));
    }
  }
  Tensor h = x;
  for (const auto& layer : layers) h = kan_layer_forward(h, layer);
  return h;
}

}  // namespace tkan
