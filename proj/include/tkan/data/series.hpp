// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tkan/core/tensor.hpp"

namespace tkan {

constexpr std::size_t kHoursPerTwoWeeks = 14 * 24;

/// Hourly multi-asset table. Timestamps are whole hours since the epoch.
struct SeriesFrame {
  std::vector<std::int64_t> timestamps;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::string target;

  std::size_t rows() const noexcept { return timestamps.size(); }
  std::size_t target_index() const;
  const std::vector<double>& column(const std::string& name) const;
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;  // missing or unparsable values
  std::size_t missing_hours = 0; // hours absent between consecutive kept rows
};

/// Reads `timestamp,<asset1>,...` (epoch seconds on hour boundaries).
/// Rows with an empty or non-numeric value are dropped and counted.
SeriesFrame read_frame_csv(const std::filesystem::path& path, const std::string& target,
                           IngestReport* report = nullptr);
void write_frame_csv(const SeriesFrame& frame, const std::filesystem::path& path);

/// Inner join on timestamps; hours missing from any column are dropped.
SeriesFrame join_columns(const std::vector<SeriesFrame>& parts, const std::string& target,
                         IngestReport* report = nullptr);

// Scaling ---------------------------------------------------------------------

/// Median of a window; even lengths average the two central values.
double window_median(std::span<const double> window);

/// out[t] = x[t] / median(x[t-H-W+1 .. t-H]) for t >= W+H-1. Entries before
/// `offset` have no full window and are not produced.
struct MedianScaled {
  std::size_t offset = 0;      // index in the input of values[0]
  std::vector<double> values;  // length n - offset
};

MedianScaled moving_median_scale(std::span<const double> series, std::size_t window,
                                 std::size_t shift);

struct MinMaxScaled {
  std::vector<double> train;
  std::vector<double> test;
  double maximum = 0.0;
};

/// Divides both parts by the maximum of `train` (minimum taken as 0).
MinMaxScaled minmax_fit_apply(std::span<const double> train, std::span<const double> test);

// Windows -----------------------------------------------------------------------

struct Windows {
  Tensor inputs;   // [N × seq_len × d]
  Tensor targets;  // [N × horizon]
  /// Row index in the frame of the last input row of each window.
  std::vector<std::size_t> end_rows;
};

/// X[i] = rows t-seq_len+1..t of every column, y[i] = target rows t+1..t+horizon.
Windows make_windows(const SeriesFrame& frame, std::size_t seq_len, std::size_t horizon);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t test = 0;
};

/// Chronological split with floor(ratio·n) training samples.
SplitCounts split_train_test(std::size_t samples, double ratio = 0.8);

// Pipeline ----------------------------------------------------------------------

struct ScalerState {
  std::size_t median_window = kHoursPerTwoWeeks;
  std::size_t shift = 1;
  std::vector<double> maxima;  // per column, fitted on training rows
};

struct PrepareOptions {
  std::size_t median_window = kHoursPerTwoWeeks;
  std::size_t seq_len = 30;
  std::size_t horizon = 1;
  double train_ratio = 0.8;
};

struct PreparedData {
  Tensor x_train, y_train, x_test, y_test;
  ScalerState scaler;
  std::size_t target_index = 0;
  std::size_t usable_rows = 0;     // rows left after the median stage
  std::size_t train_rows = 0;      // rows used to fit the min-max stage
  std::vector<std::string> names;
};

/// Moving-median stage (window W, shift = horizon), windowing, chronological
/// split, then min-max stage fitted on the rows seen by training windows.
PreparedData prepare_dataset(const SeriesFrame& frame, const PrepareOptions& options);

// Synthetic data ------------------------------------------------------------------

/// offset + Σ amplitude·sin(2πt/period + phase) + AR(1) noise.
struct SyntheticSpec {
  std::size_t length = 5000;
  double offset = 5.0;
  double amplitude_fast = 1.0;
  double period_fast = 16.0;
  double amplitude_slow = 1.0;
  double period_slow = 168.0;
  double ar_coefficient = 0.8;
  double noise_std = 0.2;  // stationary standard deviation of the AR(1) term
  std::int64_t start_hour = 438288;  // 2020-01-01T00:00Z
};

SeriesFrame make_synthetic_frame(const SyntheticSpec& spec, std::uint64_t seed,
                                 const std::string& name = "synthetic");

}  // namespace tkan
