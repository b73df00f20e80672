// SPDX-License-Identifier: Apache-2.0
#include "tkan/training/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "tkan/core/errors.hpp"
#include "tkan/core/ops.hpp"
#include "tkan/core/rng.hpp"
#include "tkan/core/tape.hpp"

namespace tkan {

double mse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw DimensionError("mse: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " targets");
  }
  if (pred.empty()) throw ContractError("mse: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    total += d * d;
  }
  return total / static_cast<double>(pred.size());
}

double mse(const Tensor& pred, const Tensor& truth) {
  if (pred.shape() != truth.shape()) {
    throw DimensionError("mse: shapes " + shape_string(pred.shape()) + " and " +
                         shape_string(truth.shape()) + " differ");
  }
  return mse(pred.values(), truth.values());
}

double r_squared(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw DimensionError("r_squared: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " targets");
  }
  if (truth.size() < 2) throw ContractError("r_squared: needs at least two values");
  double mean = 0.0;
  for (double v : truth) mean += v;
  mean /= static_cast<double>(truth.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sse += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    sst += (truth[i] - mean) * (truth[i] - mean);
  }
  if (sst == 0.0) throw UndefinedMetricError("r_squared: truth is constant");
  return 1.0 - sse / sst;
}

void adam_update(std::span<Tensor* const> params, std::span<const Tensor> grads,
                 AdamState& state) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_update: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.push_back(Tensor::zeros(p->shape()));
      state.v.push_back(Tensor::zeros(p->shape()));
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_update: optimizer state tracks a different parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() || state.m[i].shape() != grads[i].shape()) {
      throw DimensionError("adam_update: gradient " + shape_string(grads[i].shape()) +
                           " does not match parameter " + shape_string(params[i]->shape()));
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = grads[i].size();
    std::vector<double> m(n), v(n), p(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double g = grads[i][j];
      m[j] = state.beta1 * state.m[i][j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * state.v[i][j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] = (*params[i])[j] - state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    const Shape shape = params[i]->shape();
    state.m[i] = Tensor(shape, std::move(m));
    state.v[i] = Tensor(shape, std::move(v));
    *params[i] = Tensor(shape, std::move(p));
  }
}

bool EarlyStopping::on_epoch_end(std::size_t epoch, double val_loss) {
  improved_ = val_loss < best_;
  if (improved_) {
    best_ = val_loss;
    best_epoch_ = epoch;
    wait_ = 0;
    return false;
  }
  ++wait_;
  return wait_ >= patience_;
}

double ReduceLrOnPlateau::on_epoch_end(double val_loss, double lr) {
  if (val_loss < best_) {
    best_ = val_loss;
    wait_ = 0;
    return lr;
  }
  ++wait_;
  if (wait_ >= patience_) {
    wait_ = 0;
    return std::max(lr * factor_, min_lr_);
  }
  return lr;
}

std::vector<Tensor*> ModelTrainer::parameter_tensors() {
  std::vector<Tensor*> out;
  for (auto& p : model_.parameters()) out.push_back(p.tensor);
  return out;
}

double ModelTrainer::loss_and_gradients(const Tensor& inputs, const Tensor& targets,
                                        std::vector<Tensor>& grads) {
  Tape tape;
  std::vector<Tensor> leaves;
  const SequenceModel attached = model_.attach(tape, leaves);
  const Tensor loss = mse_loss(attached.forward(inputs), targets);
  const Gradients g = tape.backward(loss);
  grads.clear();
  for (const auto& leaf : leaves) grads.push_back(g.wrt(leaf));
  return loss.item();
}

double ModelTrainer::evaluate(const Tensor& inputs, const Tensor& targets) {
  const std::size_t n = inputs.dim(0);
  if (n == 0) throw ContractError("evaluate: empty split");
  double total = 0.0;
  for (std::size_t begin = 0; begin < n; begin += eval_batch_) {
    const std::size_t end = std::min(n, begin + eval_batch_);
    const Tensor pred = model_.forward(take_rows(inputs, begin, end));
    const Tensor truth = take_rows(targets, begin, end);
    if (pred.shape() != truth.shape()) {
      throw DimensionError("evaluate: predictions " + shape_string(pred.shape()) +
                           " vs targets " + shape_string(truth.shape()));
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - truth[i];
      total += d * d;
    }
  }
  return total / static_cast<double>(targets.size());
}

Tensor take_rows(const Tensor& t, std::size_t begin, std::size_t end) {
  if (t.rank() == 0 || begin > end || end > t.dim(0)) {
    throw DimensionError("take_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") outside " + shape_string(t.shape()));
  }
  const std::size_t row = t.size() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = end - begin;
  return Tensor(shape, std::vector<double>(t.data() + begin * row, t.data() + end * row));
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> index) {
  if (t.rank() == 0) throw DimensionError("gather_rows: rank-0 tensor");
  const std::size_t row = t.dim(0) ? t.size() / t.dim(0) : 0;
  std::vector<double> out(index.size() * row);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= t.dim(0)) {
      throw DimensionError("gather_rows: row " + std::to_string(index[k]) + " outside " +
                           shape_string(t.shape()));
    }
    std::memcpy(out.data() + k * row, t.data() + index[k] * row, row * sizeof(double));
  }
  Shape shape = t.shape();
  shape[0] = index.size();
  return Tensor(shape, std::move(out));
}

FitHistory fit(Trainable& model, const Tensor& inputs, const Tensor& targets,
               const FitConfig& config) {
  if (inputs.rank() == 0 || inputs.dim(0) == 0) throw ContractError("fit: no training samples");
  if (targets.rank() == 0 || targets.dim(0) != inputs.dim(0)) {
    throw DimensionError("fit: " + shape_string(inputs.shape()) + " inputs vs " +
                         shape_string(targets.shape()) + " targets");
  }
  if (config.batch_size == 0 || config.max_epochs == 0) {
    throw ContractError("fit: batch_size and max_epochs must be positive");
  }
  const std::size_t n = inputs.dim(0);
  const auto n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * (1.0 - config.validation_fraction)));
  if (n_train == 0 || n_train == n) {
    throw ContractError("fit: " + std::to_string(n) +
                        " samples cannot be split into non-empty train and validation parts");
  }
  const Tensor x_train = take_rows(inputs, 0, n_train);
  const Tensor y_train = take_rows(targets, 0, n_train);
  const Tensor x_val = take_rows(inputs, n_train, n);
  const Tensor y_val = take_rows(targets, n_train, n);

  const std::vector<Tensor*> params = model.parameter_tensors();
  AdamState adam;
  adam.lr = config.learning_rate;
  EarlyStopping stopper(config.early_stopping_patience);
  ReduceLrOnPlateau plateau(config.plateau_patience, config.plateau_factor,
                            config.min_learning_rate);
  Pcg32 shuffle_rng(config.seed, 0x5eed);

  FitHistory history;
  std::vector<Tensor> grads;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto order = shuffled_indices(n_train, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n_train; begin += config.batch_size) {
      const std::size_t end = std::min(n_train, begin + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const double loss =
          model.loss_and_gradients(gather_rows(x_train, idx), gather_rows(y_train, idx), grads);
      adam_update(params, grads, adam);
      loss_sum += loss * static_cast<double>(end - begin);
    }
    const double val_loss = model.evaluate(x_val, y_val);
    const bool stop = stopper.on_epoch_end(epoch, val_loss);
    if (stopper.improved()) {
      history.best_weights.clear();
      for (const Tensor* p : params) history.best_weights.push_back(*p);
    }
    adam.lr = plateau.on_epoch_end(val_loss, adam.lr);
    history.epochs.push_back({epoch, loss_sum / static_cast<double>(n_train), val_loss, adam.lr});
    if (stop) {
      history.stopped_early = true;
      break;
    }
  }
  history.best_epoch = stopper.best_epoch();
  history.best_val_loss = stopper.best_loss();
  if (!history.best_weights.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = history.best_weights[i];
  }
  return history;
}

void write_history_csv(const FitHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << '\n';
  }
}

}  // namespace tkan
