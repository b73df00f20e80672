// SPDX-License-Identifier: Apache-2.0
#include "tkan/core/tape.hpp"

#include "tkan/core/errors.hpp"

namespace tkan {

Tensor Tape::leaf(const Tensor& value) {
  Node node;
  node.size = value.size();
  nodes_.push_back(std::move(node));
  Tensor out(value.shape(), value.buffer());
  out.tape_ = this;
  out.node_ = nodes_.size() - 1;
  return out;
}

Tensor Tape::record(Shape shape, std::shared_ptr<const std::vector<double>> values,
                    std::span<const Tensor* const> inputs, BackwardRule rule) {
  Node node;
  node.size = values->size();
  node.rule = std::move(rule);
  node.inputs.reserve(inputs.size());
  for (const Tensor* in : inputs) {
    if (in->tape() == nullptr) {
      node.inputs.push_back(-1);
    } else if (in->tape() != this) {
      throw ContractError("operands are attached to different tapes");
    } else {
      node.inputs.push_back(static_cast<std::ptrdiff_t>(in->node()));
    }
  }
  nodes_.push_back(std::move(node));
  Tensor out(std::move(shape), std::move(values));
  out.tape_ = this;
  out.node_ = nodes_.size() - 1;
  return out;
}

Gradients Tape::backward(const Tensor& loss) const {
  if (loss.tape() != this) {
    throw ContractError("backward: loss is not recorded on this tape");
  }
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_string(loss.shape()));
  }
  Gradients out;
  out.tape_ = this;
  out.grads_.resize(nodes_.size());
  out.grads_[loss.node()] = {1.0};

  std::vector<std::span<double>> input_grads;
  for (std::size_t n = loss.node() + 1; n-- > 0;) {
    const Node& node = nodes_[n];
    if (!node.rule || out.grads_[n].empty()) continue;
    input_grads.assign(node.inputs.size(), std::span<double>{});
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const auto idx = node.inputs[k];
      if (idx < 0) continue;
      auto& g = out.grads_[static_cast<std::size_t>(idx)];
      if (g.empty()) g.assign(nodes_[static_cast<std::size_t>(idx)].size, 0.0);
      input_grads[k] = g;
    }
    node.rule(out.grads_[n], input_grads);
    // Interior gradients are no longer needed once propagated.
    if (!node.inputs.empty()) std::vector<double>().swap(out.grads_[n]);
  }
  return out;
}

Tensor Gradients::wrt(const Tensor& leaf) const {
  if (leaf.tape() != tape_ || tape_ == nullptr) {
    throw ContractError("gradient requested for a tensor not on this tape");
  }
  const auto& g = grads_[leaf.node()];
  if (g.empty()) return Tensor::zeros(leaf.shape());
  return Tensor(leaf.shape(), g);
}

}  // namespace tkan
