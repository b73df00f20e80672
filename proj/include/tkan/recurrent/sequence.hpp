// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "tkan/core/tape.hpp"
#include "tkan/recurrent/cells.hpp"

namespace tkan {

using Cell = std::variant<TkanCell, LstmCell, GruCell>;

std::size_t cell_units(const Cell& cell);

/// Runs `cell` over X[batch × T × d] from the zero state. Returns
/// [batch × T × units] when `return_sequences`, else h_T as [batch × units].
Tensor unroll(const Cell& cell, const Tensor& sequence, bool return_sequences);

struct Dense {
  Tensor kernel;  // [n_in × n_out]
  Tensor bias;    // [n_out]
};

/// x·W + b, no activation.
Tensor dense_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias);

struct RecurrentLayer {
  Cell cell;
  bool return_sequences = false;
};

enum class ModelKind { tkan, gru, lstm, naive };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Recurrent layers applied in order, then a linear dense head.
struct SequenceModel {
  ModelKind kind = ModelKind::tkan;
  std::vector<RecurrentLayer> layers;
  Dense head;

  /// X[batch × T × d] → [batch × horizon].
  Tensor forward(const Tensor& sequence) const;

  /// Every trainable tensor in a fixed, documented order.
  std::vector<NamedParam> parameters();

  /// Copy whose parameters are leaves on `tape`, in `parameters()` order.
  SequenceModel attach(Tape& tape, std::vector<Tensor>& leaves) const;
};

void append_parameters(Cell& cell, const std::string& prefix, std::vector<NamedParam>& out);

}  // namespace tkan
