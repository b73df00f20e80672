// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tkan/data/series.hpp"
#include "tkan/recurrent/sequence.hpp"
#include "tkan/training/training.hpp"

namespace tkan {

/// Everything needed to rebuild a benchmark model from scratch.
struct ModelSpec {
  ModelKind kind = ModelKind::tkan;
  std::size_t input_dim = 1;
  std::size_t horizon = 1;
  std::size_t units = 100;
  TkanOptions tkan;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

/// recurrent(units, sequences) → recurrent(units, last state) → dense(horizon).
SequenceModel build_model(const ModelSpec& spec, std::uint64_t seed);

/// Repeats the last observed target value of each window over the horizon.
Tensor naive_last_value(const Tensor& inputs, std::size_t horizon, std::size_t target_index);

// Checkpoints -----------------------------------------------------------------

void checkpoint_save(SequenceModel& model, const ModelSpec& spec,
                     const std::filesystem::path& path);
/// Overwrites every parameter of `model`; names and shapes must match.
void checkpoint_load(const std::filesystem::path& path, SequenceModel& model);
/// Rebuilds the model described in the manifest and loads its weights.
SequenceModel checkpoint_load_model(const std::filesystem::path& path, ModelSpec* spec = nullptr);

// Configuration -------------------------------------------------------------------

struct DataConfig {
  std::filesystem::path path;
  std::string target;
  std::size_t median_window = kHoursPerTwoWeeks;
  double train_ratio = 0.8;
  /// When set, `path` is ignored and a synthetic series is generated.
  std::optional<SyntheticSpec> synthetic;
  std::uint64_t synthetic_seed = 0;
};

struct ExperimentConfig {
  std::vector<ModelKind> models{ModelKind::tkan, ModelKind::gru, ModelKind::lstm,
                                ModelKind::naive};
  std::size_t units = 100;
  std::vector<std::size_t> horizons{1, 3, 6, 9, 12, 15};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t seq_len = 30;
  TkanOptions tkan;
  DataConfig data;
  FitConfig training;
  std::filesystem::path output_dir = "runs";
  std::size_t workers = 1;
  bool save_checkpoints = false;

  void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

/// Loads the configured CSV or generates the configured synthetic series.
SeriesFrame load_frame(const DataConfig& data, IngestReport* report = nullptr);
PrepareOptions prepare_options(const ExperimentConfig& config, std::size_t horizon);

// Runs ---------------------------------------------------------------------------

struct RunResult {
  ModelKind model = ModelKind::naive;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  double r2 = 0.0;
  double rmse = 0.0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double wall_seconds = 0.0;
  bool ok = true;
  std::string error;
  FitHistory history;
};

/// Trains (or evaluates, for the naive baseline) one model on prepared data
/// and scores it on the test split. R² is computed over all N·H test entries.
RunResult run_single(const ExperimentConfig& config, const PreparedData& data, ModelKind kind,
                     std::size_t horizon, std::uint64_t seed,
                     const std::filesystem::path& checkpoint_path = {});

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t count = 0;
};

Aggregate aggregate(const std::vector<double>& values);

struct RunReport {
  std::vector<RunResult> runs;
  bool complete = true;

  /// Aggregated R² per (model, horizon), over the successful seeds.
  std::map<std::pair<ModelKind, std::size_t>, Aggregate> r2_table() const;
};

/// Full factorial over models × horizons × seeds, writing report.csv,
/// report_agg.csv, timings.csv and history_<model>_h<H>_s<seed>.csv into
/// `config.output_dir`.
RunReport run_benchmark(const ExperimentConfig& config);

void write_report_csv(const RunReport& report, const std::filesystem::path& path);
RunReport read_report_csv(const std::filesystem::path& path);
void write_aggregate_csv(const RunReport& report, const std::filesystem::path& path);
void write_timings_csv(const RunReport& report, const std::filesystem::path& path);
/// Markdown tables of mean and standard deviation of R² (rows = horizons).
std::string render_tables(const RunReport& report);

std::string run_name(ModelKind kind, std::size_t horizon, std::uint64_t seed);

}  // namespace tkan
