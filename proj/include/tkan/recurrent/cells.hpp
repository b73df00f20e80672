// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tkan/core/rng.hpp"
#include "tkan/core/tensor.hpp"
#include "tkan/spline/kan.hpp"

namespace tkan {

/// Mutable view of one named parameter tensor, used for optimizers,
/// checkpoints and tape attachment.
struct NamedParam {
  std::string name;
  Tensor* tensor;
};

/// x·W + h·U + b for one gate.
struct GateParams {
  Tensor input_kernel;      // [d × units]
  Tensor recurrent_kernel;  // [units × units]
  Tensor bias;              // [units]
};

/**
 * Recurrent KAN sublayer.
 *   s_t  = x_t·W_x + h̃_{t-1}·W_h
 *   õ_t  = φ(s_t)
 *   h̃_t  = w_hh ⊙ h̃_{t-1} + w_hz ⊙ õ_t
 * With `full_matrix_memory`, w_hh and w_hz are [KAN_out × KAN_out] matrices
 * that right-multiply instead of vectors.
 */
struct RkanSublayer {
  Tensor input_mix;     // W_x [d × KAN_in]
  Tensor state_mix;     // W_h [KAN_out × KAN_in]
  KanLayer phi;         // KAN_in → KAN_out
  Tensor carry_weight;  // w_hh
  Tensor blend_weight;  // w_hz
  bool full_matrix_memory = false;

  std::size_t kan_in() const noexcept { return phi.n_in; }
  std::size_t kan_out() const noexcept { return phi.n_out; }
};

enum class CandidateActivation { sigmoid, tanh };

/// LSTM-style cell whose output gate reads the concatenated RKAN outputs.
struct TkanCell {
  std::size_t input_dim = 0;
  std::size_t units = 0;
  std::vector<RkanSublayer> sublayers;
  GateParams forget;
  GateParams input;
  GateParams candidate;
  Tensor output_kernel;  // W_o [(KAN_out·L) × units]
  Tensor output_bias;    // b_o [units]
  CandidateActivation candidate_activation = CandidateActivation::sigmoid;
};

struct LstmCell {
  std::size_t input_dim = 0;
  std::size_t units = 0;
  GateParams input;
  GateParams forget;
  GateParams candidate;
  GateParams output;
};

/// h_t = (1 − z) ⊙ h_{t-1} + z ⊙ ĥ, ĥ = tanh(x·W + (r ⊙ h_{t-1})·U + b);
/// an update gate of 0 keeps the previous state.
struct GruCell {
  std::size_t input_dim = 0;
  std::size_t units = 0;
  GateParams update;
  GateParams reset;
  GateParams candidate;
};

struct TkanState {
  Tensor h;                 // [batch × units]
  Tensor c;                 // [batch × units]
  std::vector<Tensor> sub;  // L × [batch × KAN_out]
};

struct LstmState {
  Tensor h;
  Tensor c;
};

struct GruState {
  Tensor h;
};

/// Intermediate values of one TKAN step, for inspection and tests.
struct TkanTrace {
  Tensor forget_gate;
  Tensor input_gate;
  Tensor candidate;
  Tensor kan_concat;  // r_t
  Tensor output_gate;
  TkanState state;
};

// Construction --------------------------------------------------------------

struct TkanOptions {
  std::vector<std::size_t> spline_orders{0, 1, 2, 3, 4};
  std::size_t grid_size = 5;
  /// 0 selects `units`.
  std::size_t kan_in = 0;
  std::size_t kan_out = 0;
  KanOptions kan;
  CandidateActivation candidate_activation = CandidateActivation::sigmoid;
  bool full_matrix_memory = false;
};

// Kernels are Glorot-uniform, biases zero (LSTM forget bias one), sub-memory
// weights w_hh = 1 and w_hz = 0.5.
TkanCell make_tkan_cell(std::size_t input_dim, std::size_t units, const TkanOptions& options,
                        Initializer& init);
LstmCell make_lstm_cell(std::size_t input_dim, std::size_t units, Initializer& init);
GruCell make_gru_cell(std::size_t input_dim, std::size_t units, Initializer& init);

// Steps ---------------------------------------------------------------------

/// Returns (õ_t, h̃_t).
std::pair<Tensor, Tensor> rkan_sublayer_step(const Tensor& x, const Tensor& sub_prev,
                                             const RkanSublayer& layer);

TkanTrace tkan_cell_trace(const Tensor& x, const TkanState& state, const TkanCell& cell);
TkanState tkan_cell_step(const Tensor& x, const TkanState& state, const TkanCell& cell);
LstmState lstm_cell_step(const Tensor& x, const LstmState& state, const LstmCell& cell);
GruState gru_cell_step(const Tensor& x, const GruState& state, const GruCell& cell);

TkanState zero_state(const TkanCell& cell, std::size_t batch);
LstmState zero_state(const LstmCell& cell, std::size_t batch);
GruState zero_state(const GruCell& cell, std::size_t batch);

// Parameters ----------------------------------------------------------------

void append_parameters(TkanCell& cell, const std::string& prefix, std::vector<NamedParam>& out);
void append_parameters(LstmCell& cell, const std::string& prefix, std::vector<NamedParam>& out);
void append_parameters(GruCell& cell, const std::string& prefix, std::vector<NamedParam>& out);

}  // namespace tkan
