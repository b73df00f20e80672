// SPDX-License-Identifier: Apache-2.0
#include "tkan/recurrent/cells.hpp"

#include "tkan/core/errors.hpp"
#include "tkan/core/ops.hpp"

namespace tkan {

namespace {

Tensor gate_preactivation(const Tensor& x, const Tensor& h, const GateParams& g) {
  return add_bias(add(matmul(x, g.input_kernel), matmul(h, g.recurrent_kernel)), g.bias);
}

GateParams make_gate(std::size_t input_dim, std::size_t units, Initializer& init,
                     double bias_value = 0.0) {
  GateParams g;
  g.input_kernel = init.glorot(input_dim, units, {input_dim, units});
  g.recurrent_kernel = init.glorot(units, units, {units, units});
  g.bias = Tensor::filled({units}, bias_value);
  return g;
}

void check_input(const Tensor& x, std::size_t input_dim, const char* who) {
  if (x.rank() != 2 || x.dim(1) != input_dim) {
    throw DimensionError(std::string(who) + ": input " + shape_string(x.shape()) +
                         " does not have " + std::to_string(input_dim) + " features");
  }
}

void check_state(const Tensor& s, std::size_t batch, std::size_t width, const char* who) {
  if (s.shape() != Shape{batch, width}) {
    throw DimensionError(std::string(who) + ": state " + shape_string(s.shape()) +
                         " does not match [" + std::to_string(batch) + "x" +
                         std::to_string(width) + "]");
  }
}

void append_gate(GateParams& g, const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".input_kernel", &g.input_kernel});
  out.push_back({prefix + ".recurrent_kernel", &g.recurrent_kernel});
  out.push_back({prefix + ".bias", &g.bias});
}

}  // namespace

TkanCell make_tkan_cell(std::size_t input_dim, std::size_t units, const TkanOptions& options,
                        Initializer& init) {
  if (input_dim == 0 || units == 0) throw ContractError("make_tkan_cell: zero-sized cell");
  if (options.spline_orders.empty()) {
    throw ContractError("make_tkan_cell: at least one RKAN sublayer is required");
  }
  const std::size_t kan_in = options.kan_in ? options.kan_in : units;
  const std::size_t kan_out = options.kan_out ? options.kan_out : units;

  TkanCell cell;
  cell.input_dim = input_dim;
  cell.units = units;
  cell.candidate_activation = options.candidate_activation;
  for (std::size_t order : options.spline_orders) {
    RkanSublayer sub;
    sub.input_mix = init.glorot(input_dim, kan_in, {input_dim, kan_in});
    sub.state_mix = init.glorot(kan_out, kan_in, {kan_out, kan_in});
    sub.phi = kan_layer_init(kan_in, kan_out, options.grid_size, order, init.seed(), options.kan,
                             init.next_stream());
    sub.full_matrix_memory = options.full_matrix_memory;
    if (options.full_matrix_memory) {
      std::vector<double> eye(kan_out * kan_out, 0.0);
      std::vector<double> half(kan_out * kan_out, 0.0);
      for (std::size_t i = 0; i < kan_out; ++i) {
        eye[i * kan_out + i] = 1.0;
        half[i * kan_out + i] = 0.5;
      }
      sub.carry_weight = Tensor({kan_out, kan_out}, std::move(eye));
      sub.blend_weight = Tensor({kan_out, kan_out}, std::move(half));
    } else {
      sub.carry_weight = Tensor::filled({kan_out}, 1.0);
      sub.blend_weight = Tensor::filled({kan_out}, 0.5);
    }
    cell.sublayers.push_back(std::move(sub));
  }
  cell.forget = make_gate(input_dim, units, init);
  cell.input = make_gate(input_dim, units, init);
  cell.candidate = make_gate(input_dim, units, init);
  const std::size_t concat = kan_out * cell.sublayers.size();
  cell.output_kernel = init.glorot(concat, units, {concat, units});
  cell.output_bias = Tensor::zeros({units});
  return cell;
}

LstmCell make_lstm_cell(std::size_t input_dim, std::size_t units, Initializer& init) {
  if (input_dim == 0 || units == 0) throw ContractError("make_lstm_cell: zero-sized cell");
  LstmCell cell;
  cell.input_dim = input_dim;
  cell.units = units;
  cell.input = make_gate(input_dim, units, init);
  cell.forget = make_gate(input_dim, units, init, 1.0);
  cell.candidate = make_gate(input_dim, units, init);
  cell.output = make_gate(input_dim, units, init);
  return cell;
}

GruCell make_gru_cell(std::size_t input_dim, std::size_t units, Initializer& init) {
  if (input_dim == 0 || units == 0) throw ContractError("make_gru_cell: zero-sized cell");
  GruCell cell;
  cell.input_dim = input_dim;
  cell.units = units;
  cell.update = make_gate(input_dim, units, init);
  cell.reset = make_gate(input_dim, units, init);
  cell.candidate = make_gate(input_dim, units, init);
  return cell;
}

std::pair<Tensor, Tensor> rkan_sublayer_step(const Tensor& x, const Tensor& sub_prev,
                                             const RkanSublayer& layer) {
  if (x.rank() != 2 || x.dim(1) != layer.input_mix.dim(0)) {
    throw DimensionError("rkan_sublayer_step: input " + shape_string(x.shape()) +
                         " does not match W_x " + shape_string(layer.input_mix.shape()));
  }
  check_state(sub_prev, x.dim(0), layer.kan_out(), "rkan_sublayer_step");
  const Tensor mixed = add(matmul(x, layer.input_mix), matmul(sub_prev, layer.state_mix));
  Tensor kan_out = kan_layer_forward(mixed, layer.phi);
  Tensor sub_next = layer.full_matrix_memory
                        ? add(matmul(sub_prev, layer.carry_weight), matmul(kan_out, layer.blend_weight))
                        : add(mul_row(sub_prev, layer.carry_weight), mul_row(kan_out, layer.blend_weight));
  return {std::move(kan_out), std::move(sub_next)};
}

TkanTrace tkan_cell_trace(const Tensor& x, const TkanState& state, const TkanCell& cell) {
  check_input(x, cell.input_dim, "tkan_cell_step");
  const std::size_t batch = x.dim(0);
  check_state(state.h, batch, cell.units, "tkan_cell_step");
  check_state(state.c, batch, cell.units, "tkan_cell_step");
  if (state.sub.size() != cell.sublayers.size()) {
    throw DimensionError("tkan_cell_step: state carries " + std::to_string(state.sub.size()) +
                         " sub-memories for " + std::to_string(cell.sublayers.size()) +
                         " sublayers");
  }

  TkanTrace tr;
  tr.forget_gate = sigmoid(gate_preactivation(x, state.h, cell.forget));
  tr.input_gate = sigmoid(gate_preactivation(x, state.h, cell.input));
  const Tensor cand_pre = gate_preactivation(x, state.h, cell.candidate);
  tr.candidate = cell.candidate_activation == CandidateActivation::sigmoid ? sigmoid(cand_pre)
                                                                           : tanh(cand_pre);

  std::vector<Tensor> outputs;
  outputs.reserve(cell.sublayers.size());
  tr.state.sub.reserve(cell.sublayers.size());
  for (std::size_t l = 0; l < cell.sublayers.size(); ++l) {
    auto [out, sub] = rkan_sublayer_step(x, state.sub[l], cell.sublayers[l]);
    outputs.push_back(std::move(out));
    tr.state.sub.push_back(std::move(sub));
  }
  tr.kan_concat = concat_cols(outputs);
  tr.output_gate = sigmoid(add_bias(matmul(tr.kan_concat, cell.output_kernel), cell.output_bias));
  tr.state.c = add(mul(tr.forget_gate, state.c), mul(tr.input_gate, tr.candidate));
  tr.state.h = mul(tr.output_gate, tanh(tr.state.c));
  return tr;
}

TkanState tkan_cell_step(const Tensor& x, const TkanState& state, const TkanCell& cell) {
  return tkan_cell_trace(x, state, cell).state;
}

LstmState lstm_cell_step(const Tensor& x, const LstmState& state, const LstmCell& cell) {
  check_input(x, cell.input_dim, "lstm_cell_step");
  check_state(state.h, x.dim(0), cell.units, "lstm_cell_step");
  check_state(state.c, x.dim(0), cell.units, "lstm_cell_step");
  const Tensor i = sigmoid(gate_preactivation(x, state.h, cell.input));
  const Tensor f = sigmoid(gate_preactivation(x, state.h, cell.forget));
  const Tensor g = tanh(gate_preactivation(x, state.h, cell.candidate));
  const Tensor o = sigmoid(gate_preactivation(x, state.h, cell.output));
  LstmState next;
  next.c = add(mul(f, state.c), mul(i, g));
  next.h = mul(o, tanh(next.c));
  return next;
}

GruState gru_cell_step(const Tensor& x, const GruState& state, const GruCell& cell) {
  check_input(x, cell.input_dim, "gru_cell_step");
  check_state(state.h, x.dim(0), cell.units, "gru_cell_step");
  const Tensor z = sigmoid(gate_preactivation(x, state.h, cell.update));
  const Tensor r = sigmoid(gate_preactivation(x, state.h, cell.reset));
  const Tensor cand = tanh(gate_preactivation(x, mul(r, state.h), cell.candidate));
  return {add(mul(one_minus(z), state.h), mul(z, cand))};
}

TkanState zero_state(const TkanCell& cell, std::size_t batch) {
  TkanState s{Tensor::zeros({batch, cell.units}), Tensor::zeros({batch, cell.units}), {}};
  for (const auto& sub : cell.sublayers) s.sub.push_back(Tensor::zeros({batch, sub.kan_out()}));
  return s;
}

LstmState zero_state(const LstmCell& cell, std::size_t batch) {
  return {Tensor::zeros({batch, cell.units}), Tensor::zeros({batch, cell.units})};
}

GruState zero_state(const GruCell& cell, std::size_t batch) {
  return {Tensor::zeros({batch, cell.units})};
}

void append_parameters(TkanCell& cell, const std::string& prefix, std::vector<NamedParam>& out) {
  for (std::size_t l = 0; l < cell.sublayers.size(); ++l) {
    auto& sub = cell.sublayers[l];
    const std::string p = prefix + ".rkan" + std::to_string(l);
    out.push_back({p + ".input_mix", &sub.input_mix});
    out.push_back({p + ".state_mix", &sub.state_mix});
    out.push_back({p + ".phi.spline_coeffs", &sub.phi.spline_coeffs});
    out.push_back({p + ".phi.base_weight", &sub.phi.base_weight});
    out.push_back({p + ".carry_weight", &sub.carry_weight});
    out.push_back({p + ".blend_weight", &sub.blend_weight});
  }
  append_gate(cell.forget, prefix + ".forget", out);
  append_gate(cell.input, prefix + ".input", out);
  append_gate(cell.candidate, prefix + ".candidate", out);
  out.push_back({prefix + ".output_kernel", &cell.output_kernel});
  out.push_back({prefix + ".output_bias", &cell.output_bias});
}

void append_parameters(LstmCell& cell, const std::string& prefix, std::vector<NamedParam>& out) {
  append_gate(cell.input, prefix + ".input", out);
  append_gate(cell.forget, prefix + ".forget", out);
  append_gate(cell.candidate, prefix + ".candidate", out);
  append_gate(cell.output, prefix + ".output", out);
}

void append_parameters(GruCell& cell, const std::string& prefix, std::vector<NamedParam>& out) {
  append_gate(cell.update, prefix + ".update", out);
  append_gate(cell.reset, prefix + ".reset", out);
  append_gate(cell.candidate, prefix + ".candidate", out);
}

}  // namespace tkan
