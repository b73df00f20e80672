// SPDX-License-Identifier: Apache-2.0
#include "tkan/core/ops.hpp"

#include <Eigen/Core>
#include <cmath>

#include "tkan/core/errors.hpp"

namespace tkan {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

namespace detail {

Tape* common_tape(std::span<const Tensor* const> operands) {
  Tape* tape = nullptr;
  for (const Tensor* t : operands) {
    if (t->tape() == nullptr) continue;
    if (tape != nullptr && t->tape() != tape) {
      throw ContractError("operands are attached to different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

Tensor make_result(Shape shape, std::shared_ptr<const std::vector<double>> values,
                   std::span<const Tensor* const> operands, BackwardRule rule) {
  for (std::size_t i = 0; i < values->size(); ++i) {
    if (!std::isfinite((*values)[i])) {
      throw std::domain_error("operation produced a non-finite value at flat index " +
                              std::to_string(i));
    }
  }
  Tape* tape = common_tape(operands);
  if (tape == nullptr) return Tensor::adopt(std::move(shape), std::move(values));
  return tape->record(std::move(shape), std::move(values), operands, std::move(rule));
}

Tensor make_result(Shape shape, std::vector<double> values,
                   std::initializer_list<const Tensor*> operands, BackwardRule rule) {
  auto shared = std::make_shared<const std::vector<double>>(std::move(values));
  return make_result(std::move(shape), std::move(shared),
                     std::span<const Tensor* const>(operands.begin(), operands.size()),
                     std::move(rule));
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_string(t.shape()));
  }
}

}  // namespace detail

using detail::make_result;
using detail::require_rank;

namespace {

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.dim(0)),
                  static_cast<Eigen::Index>(t.dim(1)));
}

MutMap as_matrix(std::span<double> g, std::size_t rows, std::size_t cols) {
  return MutMap(g.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

template <typename Fn>
std::vector<double> map_values(const Tensor& x, Fn fn) {
  std::vector<double> out(x.size());
  const double* in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(in[i]);
  return out;
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  as_matrix(out, m, n).noalias() = as_matrix(a) * as_matrix(b);
  return make_result({m, n}, std::move(out), {&a, &b},
                     [a = a.detached(), b = b.detached(), m, k, n](
                         std::span<const double> g, std::span<const std::span<double>> in) {
                       ConstMap go(g.data(), static_cast<Eigen::Index>(m),
                                   static_cast<Eigen::Index>(n));
                       if (!in[0].empty()) as_matrix(in[0], m, k).noalias() += go * as_matrix(b).transpose();
                       if (!in[1].empty()) as_matrix(in[1], k, n).noalias() += as_matrix(a).transpose() * go;
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), {&a, &b},
                     [](std::span<const double> g, std::span<const std::span<double>> in) {
                       for (auto& gi : in) {
                         for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), {&a, &b},
                     [](std::span<const double> g, std::span<const std::span<double>> in) {
                       for (std::size_t i = 0; i < in[0].size(); ++i) in[0][i] += g[i];
                       for (std::size_t i = 0; i < in[1].size(); ++i) in[1][i] -= g[i];
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), {&a, &b},
                     [a = a.detached(), b = b.detached()](
                         std::span<const double> g, std::span<const std::span<double>> in) {
                       for (std::size_t i = 0; i < in[0].size(); ++i) in[0][i] += g[i] * b[i];
                       for (std::size_t i = 0; i < in[1].size(); ++i) in[1][i] += g[i] * a[i];
                     });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_bias");
  require_rank(bias, 1, "add_bias");
  if (bias.dim(0) != x.dim(1)) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) +
                         " does not match columns of " + shape_string(x.shape()));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] + bias[c];
  }
  return make_result(x.shape(), std::move(out), {&x, &bias},
                     [rows, cols](std::span<const double> g,
                                  std::span<const std::span<double>> in) {
                       for (std::size_t i = 0; i < in[0].size(); ++i) in[0][i] += g[i];
                       if (!in[1].empty()) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < cols; ++c) in[1][c] += g[r * cols + c];
                         }
                       }
                     });
}

Tensor mul_row(const Tensor& x, const Tensor& weight) {
  require_rank(x, 2, "mul_row");
  require_rank(weight, 1, "mul_row");
  if (weight.dim(0) != x.dim(1)) {
    throw DimensionError("mul_row: weight " + shape_string(weight.shape()) +
                         " does not match columns of " + shape_string(x.shape()));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] * weight[c];
  }
  return make_result(x.shape(), std::move(out), {&x, &weight},
                     [x = x.detached(), w = weight.detached(), rows, cols](
                         std::span<const double> g, std::span<const std::span<double>> in) {
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < cols; ++c) {
                           const std::size_t i = r * cols + c;
                           if (!in[0].empty()) in[0][i] += g[i] * w[c];
                           if (!in[1].empty()) in[1][c] += g[i] * x[i];
                         }
                       }
                     });
}

Tensor scale(const Tensor& x, double factor) {
  return make_result(x.shape(), map_values(x, [factor](double v) { return v * factor; }), {&x},
                     [factor](std::span<const double> g, std::span<const std::span<double>> in) {
                       for (std::size_t i = 0; i < in[0].size(); ++i) in[0][i] += factor * g[i];
                     });
}

Tensor one_minus(const Tensor& x) {
  return make_result(x.shape(), map_values(x, [](double v) { return 1.0 - v; }), {&x},
                     [](std::span<const double> g, std::span<const std::span<double>> in) {
                       for (std::size_t i = 0; i < in[0].size(); ++i) in[0][i] -= g[i];
                     });
}

Tensor sigmoid(const Tensor& x) {
  auto out = std::make_shared<const std::vector<double>>(map_values(x, stable_sigmoid));
  const Tensor* ops[] = {&x};
  return make_result(x.shape(), out, ops,
                     [out](std::span<const double> g, std::span<const std::span<double>> in) {
                       const auto& y = *out;
                       for (std::size_t i = 0; i < in[0].size(); ++i) {
                         in[0][i] += g[i] * y[i] * (1.0 - y[i]);
                       }
                     });
}

Tensor tanh(const Tensor& x) {
  auto out = std::make_shared<const std::vector<double>>(
      map_values(x, [](double v) { return std::tanh(v); }));
  const Tensor* ops[] = {&x};
  return make_result(x.shape(), out, ops,
                     [out](std::span<const double> g, std::span<const std::span<double>> in) {
                       const auto& y = *out;
                       for (std::size_t i = 0; i < in[0].size(); ++i) {
                         in[0][i] += g[i] * (1.0 - y[i] * y[i]);
                       }
                     });
}

Tensor silu(const Tensor& x) {
  return make_result(x.shape(), map_values(x, [](double v) { return v * stable_sigmoid(v); }),
                     {&x},
                     [x = x.detached()](std::span<const double> g,
                                        std::span<const std::span<double>> in) {
                       for (std::size_t i = 0; i < in[0].size(); ++i) {
                         const double s = stable_sigmoid(x[i]);
                         in[0][i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
                       }
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  const std::size_t rows = parts.front().rank() == 2 ? parts.front().dim(0) : 0;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row counts differ (" + shape_string(p.shape()) +
                           " vs " + std::to_string(rows) + " rows)");
    }
    offsets.push_back(total);
    total += p.dim(1);
  }
  std::vector<double> out(rows * total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = parts[k].dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) out[r * total + offsets[k] + c] = parts[k][r * w + c];
    }
  }
  std::vector<const Tensor*> ops;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    ops.push_back(&p);
    widths.push_back(p.dim(1));
  }
  return make_result({rows, total}, std::make_shared<const std::vector<double>>(std::move(out)),
                     ops,
                     [rows, total, offsets, widths](std::span<const double> g,
                                                    std::span<const std::span<double>> in) {
                       for (std::size_t k = 0; k < in.size(); ++k) {
                         if (in[k].empty()) continue;
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < widths[k]; ++c) {
                             in[k][r * widths[k] + c] += g[r * total + offsets[k] + c];
                           }
                         }
                       }
                     });
}

Tensor time_step(const Tensor& sequence, std::size_t step) {
  require_rank(sequence, 3, "time_step");
  const std::size_t b = sequence.dim(0), t = sequence.dim(1), d = sequence.dim(2);
  if (step >= t) {
    throw DimensionError("time_step: step " + std::to_string(step) + " outside sequence " +
                         shape_string(sequence.shape()));
  }
  std::vector<double> out(b * d);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = sequence[(i * t + step) * d + j];
  }
  return make_result({b, d}, std::move(out), {&sequence},
                     [b, t, d, step](std::span<const double> g,
                                     std::span<const std::span<double>> in) {
                       for (std::size_t i = 0; i < b; ++i) {
                         for (std::size_t j = 0; j < d; ++j) in[0][(i * t + step) * d + j] += g[i * d + j];
                       }
                     });
}

Tensor stack_steps(std::span<const Tensor> steps) {
  if (steps.empty()) throw ContractError("stack_steps: no steps");
  const Shape& first = steps.front().shape();
  for (const auto& s : steps) {
    require_rank(s, 2, "stack_steps");
    if (s.shape() != first) {
      throw DimensionError("stack_steps: step shape " + shape_string(s.shape()) + " vs " +
                           shape_string(first));
    }
  }
  const std::size_t b = first[0], n = first[1], t = steps.size();
  std::vector<double> out(b * t * n);
  for (std::size_t s = 0; s < t; ++s) {
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < n; ++j) out[(i * t + s) * n + j] = steps[s][i * n + j];
    }
  }
  std::vector<const Tensor*> ops;
  for (const auto& s : steps) ops.push_back(&s);
  return make_result({b, t, n}, std::make_shared<const std::vector<double>>(std::move(out)), ops,
                     [b, t, n](std::span<const double> g, std::span<const std::span<double>> in) {
                       for (std::size_t s = 0; s < t; ++s) {
                         if (in[s].empty()) continue;
                         for (std::size_t i = 0; i < b; ++i) {
                           for (std::size_t j = 0; j < n; ++j) in[s][i * n + j] += g[(i * t + s) * n + j];
                         }
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return make_result({}, std::vector<double>{total}, {&x},
                     [](std::span<const double> g, std::span<const std::span<double>> in) {
                       for (auto& v : in[0]) v += g[0];
                     });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor mse_loss(const Tensor& pred, const Tensor& truth) {
  require_same_shape(pred, truth, "mse_loss");
  if (pred.size() == 0) throw ContractError("mse_loss: empty operands");
  const double n = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    total += d * d;
  }
  return make_result({}, std::vector<double>{total / n}, {&pred, &truth},
                     [p = pred.detached(), t = truth.detached(), n](
                         std::span<const double> g, std::span<const std::span<double>> in) {
                       const double f = 2.0 * g[0] / n;
                       for (std::size_t i = 0; i < in[0].size(); ++i) in[0][i] += f * (p[i] - t[i]);
                       for (std::size_t i = 0; i < in[1].size(); ++i) in[1][i] -= f * (p[i] - t[i]);
                     });
}

}  // namespace tkan
