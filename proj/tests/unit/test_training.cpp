// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "tkan/bench/experiment.hpp"
#include "tkan/core/errors.hpp"
#include "tkan/training/training.hpp"

using namespace tkan;

TEST(Metrics, MseExamples) {
  EXPECT_EQ(mse(Tensor::vector({1, 2}), Tensor::vector({1, 2})), 0.0);
  EXPECT_EQ(mse(Tensor::filled({2, 3}, 1.0), Tensor::zeros({2, 3})), 1.0);
  EXPECT_EQ(mse(Tensor::vector({1, 2}), Tensor::vector({0, 0})), 2.5);
  EXPECT_THROW(mse(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
}

TEST(Metrics, RSquaredExamples) {
  const std::vector<double> truth{0, 1, 2};
  EXPECT_EQ(r_squared(truth, truth), 1.0);
  EXPECT_EQ(r_squared(std::vector<double>{1, 1, 1}, truth), 0.0);
  EXPECT_DOUBLE_EQ(r_squared(std::vector<double>{0, 0, 0}, truth), -1.5);
  EXPECT_THROW(r_squared(std::vector<double>{1, 2}, std::vector<double>{3, 3}), UndefinedMetricError);
  EXPECT_THROW(r_squared(std::vector<double>{1}, std::vector<double>{1}), ContractError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p = Tensor::vector({1, -2, 3});
  const Tensor before = p;
  AdamState st;
  Tensor* params[] = {&p};
  const Tensor grads[] = {Tensor::zeros({3})};
  adam_update(params, grads, st);
  EXPECT_TRUE(p.same_values(before));
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::scalar(0.3);
  AdamState st;
  st.lr = 1e-3;
  Tensor* params[] = {&p};
  const Tensor grads[] = {Tensor::scalar(1.0)};
  adam_update(params, grads, st);
  // m̂ = 1, v̂ = 1, so Δ = -lr·1/(1+ε)
  EXPECT_NEAR(p.item() - 0.3, -1e-3, 1e-9);
}

TEST(Adam, IdenticalGradientsGiveIdenticalUpdates) {
  Tensor a = Tensor::vector({0.5, 0.5}), b = Tensor::vector({0.5, 0.5});
  AdamState st;
  Tensor* params[] = {&a, &b};
  const Tensor grads[] = {Tensor::vector({0.2, -0.7}), Tensor::vector({0.2, -0.7})};
  for (int i = 0; i < 5; ++i) adam_update(params, grads, st);
  EXPECT_TRUE(a.same_values(b));
}

TEST(Adam, ShapeMismatch) {
  Tensor a = Tensor::vector({1, 2});
  AdamState st;
  Tensor* params[] = {&a};
  const Tensor grads[] = {Tensor::vector({1, 2, 3})};
  EXPECT_THROW(adam_update(params, grads, st), DimensionError);
}

TEST(Callbacks, EarlyStoppingScript) {
  EarlyStopping es(6);
  const double losses[] = {1.0, 0.9, 0.95, 0.96, 0.97, 0.98, 0.99, 1.0};
  for (std::size_t e = 1; e <= 8; ++e) EXPECT_EQ(es.on_epoch_end(e, losses[e - 1]), e == 8) << e;
  EXPECT_EQ(es.best_epoch(), 2u);
  EXPECT_EQ(es.best_loss(), 0.9);
}

TEST(Callbacks, PlateauHalvesAfterThreeStagnantEpochs) {
  ReduceLrOnPlateau plateau(3, 0.5, 1e-6);
  double lr = 1e-3;
  const double seq[] = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  std::vector<double> lrs;
  for (double v : seq) lrs.push_back(lr = plateau.on_epoch_end(v, lr));
  EXPECT_EQ(lrs[2], 1e-3);
  EXPECT_EQ(lrs[3], 5e-4);
  EXPECT_EQ(lrs[5], 5e-4);
  EXPECT_EQ(lrs[6], 2.5e-4);
}

TEST(Callbacks, PlateauRespectsFloor) {
  ReduceLrOnPlateau plateau(1, 0.5, 1e-6);
  double lr = 3e-6;
  plateau.on_epoch_end(1.0, lr);
  for (int i = 0; i < 5; ++i) lr = plateau.on_epoch_end(1.0, lr);
  EXPECT_EQ(lr, 1e-6);
}

namespace {

// One scalar weight. Each distinct weight value seen by evaluate() is paired
// with the next scripted loss, so re-evaluating a restored weight reproduces
// the loss it was first scored with.
class ScriptedModel : public Trainable {
 public:
  explicit ScriptedModel(std::vector<double> script) : script_(std::move(script)) {}
  std::vector<Tensor*> parameter_tensors() override { return {&w_}; }
  double loss_and_gradients(const Tensor&, const Tensor&, std::vector<Tensor>& grads) override {
    grads = {Tensor::scalar(1.0)};
    return 0.5;
  }
  double evaluate(const Tensor&, const Tensor&) override {
    const auto it = seen_.find(w_.item());
    if (it != seen_.end()) return it->second;
    const double loss = script_.at(std::min(next_++, script_.size() - 1));
    seen_[w_.item()] = loss;
    return loss;
  }
  double weight() const { return w_.item(); }

 private:
  std::vector<double> script_;
  std::size_t next_ = 0;
  std::map<double, double> seen_;
  Tensor w_ = Tensor::scalar(0.0);
};

FitConfig scripted_config(std::size_t max_epochs) {
  FitConfig c;
  c.max_epochs = max_epochs;
  c.batch_size = 8;
  return c;
}

const Tensor kInputs = Tensor::zeros({10, 1});
const Tensor kTargets = Tensor::zeros({10, 1});

}  // namespace

TEST(Fit, StopsSixEpochsAfterBestAndRestores) {
  ScriptedModel m({1.0, 0.9, 0.95, 0.96, 0.97, 0.98, 0.99, 1.0, 0.1, 0.1});
  const FitHistory h = fit(m, kInputs, kTargets, scripted_config(100));
  EXPECT_EQ(h.epochs_run(), 8u);
  EXPECT_TRUE(h.stopped_early);
  EXPECT_EQ(h.best_epoch, 2u);
  EXPECT_EQ(h.best_val_loss, 0.9);
  EXPECT_EQ(m.weight(), h.best_weights[0].item());
  EXPECT_EQ(m.evaluate(kInputs, kTargets), 0.9);
}

TEST(Fit, PlateauHalvesLearningRateAtEpochFour) {
  ScriptedModel m({1.0, 1.0, 1.0, 1.0, 1.0});
  const FitHistory h = fit(m, kInputs, kTargets, scripted_config(5));
  EXPECT_EQ(h.epochs[2].lr, 1e-3);
  EXPECT_EQ(h.epochs[3].lr, 5e-4);
}

TEST(Fit, SingleEpochKeepsFinalWeights) {
  ScriptedModel m({0.4});
  const FitHistory h = fit(m, kInputs, kTargets, scripted_config(1));
  EXPECT_EQ(h.best_epoch, 1u);
  EXPECT_EQ(m.weight(), h.best_weights[0].item());
}

TEST(Fit, RejectsEmptyOrUnsplittableData) {
  ScriptedModel m({1.0});
  EXPECT_THROW(fit(m, Tensor::zeros({0, 1}), Tensor::zeros({0, 1}), scripted_config(1)), ContractError);
  EXPECT_THROW(fit(m, Tensor::zeros({1, 1}), Tensor::zeros({1, 1}), scripted_config(1)), ContractError);
  EXPECT_THROW(fit(m, Tensor::zeros({4, 1}), Tensor::zeros({3, 1}), scripted_config(1)), DimensionError);
}

namespace {

struct SmallProblem {
  Tensor x, y;
};

SmallProblem small_problem() {
  const Tensor x = rng_uniform(11, {40, 6, 2}, 0.0, 1.0);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = 0.5 * x.at(i, 5, 0) + 0.3 * x.at(i, 4, 1);
  return {x, Tensor({40, 1}, y)};
}

}  // namespace

TEST(Fit, RealModelDeterministicAndRestoresBest) {
  const auto data = small_problem();
  ModelSpec spec;
  spec.kind = ModelKind::gru;
  spec.input_dim = 2;
  spec.units = 4;
  FitConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 12;
  cfg.learning_rate = 1e-2;
  cfg.seed = 3;

  SequenceModel a = build_model(spec, 5), b = build_model(spec, 5);
  ModelTrainer ta(a), tb(b);
  const FitHistory ha = fit(ta, data.x, data.y, cfg);
  const FitHistory hb = fit(tb, data.x, data.y, cfg);
  ASSERT_EQ(ha.epochs.size(), hb.epochs.size());
  for (std::size_t e = 0; e < ha.epochs.size(); ++e) {
    EXPECT_EQ(ha.epochs[e].train_loss, hb.epochs[e].train_loss);
    EXPECT_EQ(ha.epochs[e].val_loss, hb.epochs[e].val_loss);
    EXPECT_EQ(ha.epochs[e].lr, hb.epochs[e].lr);
  }
  double min_val = INFINITY;
  for (std::size_t e = 0; e < ha.epochs.size(); ++e) {
    min_val = std::min(min_val, ha.epochs[e].val_loss);
    if (e > 0) EXPECT_LE(ha.epochs[e].lr, ha.epochs[e - 1].lr);
  }
  EXPECT_EQ(ha.best_val_loss, min_val);
  EXPECT_LE(ha.epochs_run(), ha.best_epoch + cfg.early_stopping_patience);
  const Tensor x_val = take_rows(data.x, 32, 40), y_val = take_rows(data.y, 32, 40);
  EXPECT_NEAR(ta.evaluate(x_val, y_val), ha.best_val_loss, 1e-10);
}

TEST(Fit, HistoryCsv) {
  FitHistory h;
  h.epochs = {{1, 0.5, 0.25, 1e-3}, {2, 0.125, 0.0625, 5e-4}};
  const auto path = std::filesystem::temp_directory_path() / "tkan_history_test.csv";
  write_history_csv(h, path);
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "epoch,train_loss,val_loss,lr");
  EXPECT_EQ(first, "1,0.5,0.25,0.001");
  std::filesystem::remove(path);
}

TEST(Rows, TakeAndGather) {
  const Tensor t = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_TRUE(take_rows(t, 1, 3).same_values(Tensor::matrix({{3, 4}, {5, 6}})));
  const std::size_t idx[] = {2, 0};
  EXPECT_TRUE(gather_rows(t, idx).same_values(Tensor::matrix({{5, 6}, {1, 2}})));
  EXPECT_THROW(take_rows(t, 2, 4), DimensionError);
}
