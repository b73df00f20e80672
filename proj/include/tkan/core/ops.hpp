// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tkan/core/tape.hpp"
#include "tkan/core/tensor.hpp"

// Differentiable primitives. Every function is pure; the result is recorded on
// the operands' tape when at least one operand is attached. Activations are
// row vectors with the batch dimension first; the only broadcast is a
// trailing vector over the rows of a matrix.
namespace tkan {

/// [m×k]·[k×n] → [m×n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product.
Tensor mul(const Tensor& a, const Tensor& b);

/// x[b×n] + bias[n] for every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// x[b×n] ⊙ weight[n] for every row.
Tensor mul_row(const Tensor& x, const Tensor& weight);

Tensor scale(const Tensor& x, double factor);
/// 1 − x elementwise.
Tensor one_minus(const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// x·σ(x).
Tensor silu(const Tensor& x);

/// Concatenates matrices with equal row counts along the column axis.
Tensor concat_cols(std::span<const Tensor> parts);

/// X[b×T×d] → X[:, step, :] as [b×d].
Tensor time_step(const Tensor& sequence, std::size_t step);
/// T matrices [b×n] → [b×T×n].
Tensor stack_steps(std::span<const Tensor> steps);

/// Sum of all entries as a rank-0 tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Mean squared difference over all entries; shapes must match.
Tensor mse_loss(const Tensor& pred, const Tensor& truth);

namespace detail {

/// Finds the common tape of the attached operands (nullptr when none).
Tape* common_tape(std::span<const Tensor* const> operands);

/// Wraps a freshly computed result, recording it when an operand is attached.
Tensor make_result(Shape shape, std::vector<double> values,
                   std::initializer_list<const Tensor*> operands, BackwardRule rule);
Tensor make_result(Shape shape, std::shared_ptr<const std::vector<double>> values,
                   std::span<const Tensor* const> operands, BackwardRule rule);

void require_rank(const Tensor& t, std::size_t rank, const char* what);

}  // namespace detail
}  // namespace tkan
