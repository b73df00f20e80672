// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "tkan/core/tensor.hpp"
#include "tkan/recurrent/sequence.hpp"

namespace tkan {

// Metrics -------------------------------------------------------------------

/// Mean of squared differences over all entries.
double mse(const Tensor& pred, const Tensor& truth);
double mse(std::span<const double> pred, std::span<const double> truth);

/// 1 − SSE/SST with SST about the mean of `truth`.
double r_squared(std::span<const double> pred, std::span<const double> truth);

// Adam ----------------------------------------------------------------------

struct AdamState {
  std::size_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam step; replaces each `*params[i]` with its update.
void adam_update(std::span<Tensor* const> params, std::span<const Tensor> grads,
                 AdamState& state);

// Callbacks -----------------------------------------------------------------

/// Stops after `patience` consecutive epochs without a strictly lower
/// validation loss and remembers the best epoch.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when training should stop after this epoch (1-based).
  bool on_epoch_end(std::size_t epoch, double val_loss);

  bool improved() const noexcept { return improved_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t wait_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs without a strictly lower validation loss, never below `min_lr`.
class ReduceLrOnPlateau {
 public:
  ReduceLrOnPlateau(std::size_t patience, double factor, double min_lr)
      : patience_(patience), factor_(factor), min_lr_(min_lr) {}

  /// Returns the learning rate to use from the next epoch on.
  double on_epoch_end(double val_loss, double lr);

 private:
  std::size_t patience_;
  double factor_;
  double min_lr_;
  std::size_t wait_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

// Fit loop ------------------------------------------------------------------

/// Anything `fit` can train.
class Trainable {
 public:
  virtual ~Trainable() = default;
  virtual std::vector<Tensor*> parameter_tensors() = 0;
  /// Mean loss on the batch; writes one gradient per parameter tensor.
  virtual double loss_and_gradients(const Tensor& inputs, const Tensor& targets,
                                    std::vector<Tensor>& grads) = 0;
  /// Mean loss over a full split without recording gradients.
  virtual double evaluate(const Tensor& inputs, const Tensor& targets) = 0;
};

/// Adapts a SequenceModel to `Trainable` with MSE loss.
class ModelTrainer : public Trainable {
 public:
  explicit ModelTrainer(SequenceModel& model, std::size_t eval_batch = 256)
      : model_(model), eval_batch_(eval_batch) {}

  std::vector<Tensor*> parameter_tensors() override;
  double loss_and_gradients(const Tensor& inputs, const Tensor& targets,
                            std::vector<Tensor>& grads) override;
  double evaluate(const Tensor& inputs, const Tensor& targets) override;

 private:
  SequenceModel& model_;
  std::size_t eval_batch_;
};

struct FitConfig {
  std::size_t batch_size = 128;
  std::size_t max_epochs = 100;
  double learning_rate = 1e-3;
  double min_learning_rate = 1e-6;
  double validation_fraction = 0.2;
  std::size_t early_stopping_patience = 6;
  std::size_t plateau_patience = 3;
  double plateau_factor = 0.5;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // learning rate in effect after this epoch's callbacks
};

struct FitHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_weights;
  bool stopped_early = false;

  std::size_t epochs_run() const noexcept { return epochs.size(); }
};

/// Rows [begin, end) of a tensor along its first axis.
Tensor take_rows(const Tensor& t, std::size_t begin, std::size_t end);
/// Rows `index` of a tensor along its first axis, in the given order.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> index);

/**
 * Chronological train/validation split (last `validation_fraction` of the
 * samples), shuffled mini-batch Adam epochs, early stopping with best-weight
 * restore and plateau learning-rate reduction. On return the model holds the
 * best-validation weights.
 */
FitHistory fit(Trainable& model, const Tensor& inputs, const Tensor& targets,
               const FitConfig& config);

/// epoch,train_loss,val_loss,lr
void write_history_csv(const FitHistory& history, const std::filesystem::path& path);

}  // namespace tkan
