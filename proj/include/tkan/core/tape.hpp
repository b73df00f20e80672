// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tkan/core/tensor.hpp"

namespace tkan {

/// Receives d(loss)/d(output) and accumulates into each input's gradient.
/// Entries of `input_grads` are empty spans for inputs that are not attached.
using BackwardRule = std::function<void(std::span<const double> output_grad,
                                        std::span<const std::span<double>> input_grads)>;

class Gradients;

/**
 * Records primitive operations in execution order for reverse-mode
 * differentiation. Confined to one thread; use one tape per independent
 * computation.
 */
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `value` as a differentiable leaf (parameter or input).
  Tensor leaf(const Tensor& value);

  /// Appends a node whose inputs are the attached operands among `inputs`.
  Tensor record(Shape shape, std::shared_ptr<const std::vector<double>> values,
                std::span<const Tensor* const> inputs, BackwardRule rule);

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar `loss` recorded on this tape.
  Gradients backward(const Tensor& loss) const;

 private:
  struct Node {
    std::vector<std::ptrdiff_t> inputs;  // -1 marks a constant operand
    std::size_t size = 0;
    BackwardRule rule;
  };
  std::vector<Node> nodes_;
};

/// d(loss)/d(leaf) for every leaf reachable from the loss.
class Gradients {
 public:
  /// Gradient for an attached leaf; zeros if the loss does not depend on it.
  Tensor wrt(const Tensor& leaf) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<std::vector<double>> grads_;
};

}  // namespace tkan
