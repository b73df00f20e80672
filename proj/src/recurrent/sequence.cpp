// SPDX-License-Identifier: Apache-2.0
#include "tkan/recurrent/sequence.hpp"

#include "tkan/core/errors.hpp"
#include "tkan/core/ops.hpp"

namespace tkan {

namespace {

template <typename CellT, typename StepFn>
Tensor unroll_with(const CellT& cell, const Tensor& sequence, bool return_sequences, StepFn step) {
  const std::size_t batch = sequence.dim(0), steps = sequence.dim(1);
  auto state = zero_state(cell, batch);
  std::vector<Tensor> outputs;
  if (return_sequences) outputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    state = step(time_step(sequence, t), state, cell);
    if (return_sequences) outputs.push_back(state.h);
  }
  if (return_sequences) return stack_steps(outputs);
  return state.h;
}

}  // namespace

std::size_t cell_units(const Cell& cell) {
  return std::visit([](const auto& c) { return c.units; }, cell);
}

Tensor unroll(const Cell& cell, const Tensor& sequence, bool return_sequences) {
  detail::require_rank(sequence, 3, "unroll");
  if (sequence.dim(1) == 0) throw ContractError("unroll: sequence has no timesteps");
  return std::visit(
      [&](const auto& c) -> Tensor {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TkanCell>) {
          return unroll_with(c, sequence, return_sequences,
                             [](const Tensor& x, const TkanState& s, const TkanCell& cc) {
                               return tkan_cell_step(x, s, cc);
                             });
        } else if constexpr (std::is_same_v<T, LstmCell>) {
          return unroll_with(c, sequence, return_sequences,
                             [](const Tensor& x, const LstmState& s, const LstmCell& cc) {
                               return lstm_cell_step(x, s, cc);
                             });
        } else {
          return unroll_with(c, sequence, return_sequences,
                             [](const Tensor& x, const GruState& s, const GruCell& cc) {
                               return gru_cell_step(x, s, cc);
                             });
        }
      },
      cell);
}

Tensor dense_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  return add_bias(matmul(x, kernel), bias);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::tkan: return "tkan";
    case ModelKind::gru: return "gru";
    case ModelKind::lstm: return "lstm";
    case ModelKind::naive: return "naive";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "tkan") return ModelKind::tkan;
  if (text == "gru") return ModelKind::gru;
  if (text == "lstm") return ModelKind::lstm;
  if (text == "naive") return ModelKind::naive;
  throw ContractError("unknown model kind '" + text + "' (expected tkan, gru, lstm or naive)");
}

Tensor SequenceModel::forward(const Tensor& sequence) const {
  if (layers.empty()) throw ContractError("SequenceModel::forward: model has no recurrent layers");
  Tensor h = sequence;
  for (const auto& layer : layers) h = unroll(layer.cell, h, layer.return_sequences);
  if (h.rank() != 2) {
    throw DimensionError("SequenceModel::forward: last recurrent layer must return only h_T");
  }
  return dense_forward(h, head.kernel, head.bias);
}

void append_parameters(Cell& cell, const std::string& prefix, std::vector<NamedParam>& out) {
  std::visit([&](auto& c) { append_parameters(c, prefix, out); }, cell);
}

std::vector<NamedParam> SequenceModel::parameters() {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    append_parameters(layers[i].cell, "layer" + std::to_string(i), out);
  }
  out.push_back({"head.kernel", &head.kernel});
  out.push_back({"head.bias", &head.bias});
  return out;
}

SequenceModel SequenceModel::attach(Tape& tape, std::vector<Tensor>& leaves) const {
  SequenceModel copy = *this;
  leaves.clear();
  for (auto& p : copy.parameters()) {
    *p.tensor = tape.leaf(*p.tensor);
    leaves.push_back(*p.tensor);
  }
  return copy;
}

}  // namespace tkan
