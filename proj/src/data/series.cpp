// SPDX-License-Identifier: Apache-2.0
#include "tkan/data/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "tkan/core/errors.hpp"
#include "tkan/core/rng.hpp"

namespace tkan {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_double(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first == last) return false;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool parse_int(const std::string& text, std::int64_t& out) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::size_t count_missing_hours(const std::vector<std::int64_t>& ts) {
  std::size_t missing = 0;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    missing += static_cast<std::size_t>(ts[i] - ts[i - 1] - 1);
  }
  return missing;
}

double standard_normal(Pcg32& rng) {
  // Box–Muller; u1 is kept away from 0.
  const double u1 = 1.0 - rng.next_unit();
  const double u2 = rng.next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::size_t SeriesFrame::target_index() const {
  const auto it = std::find(names.begin(), names.end(), target);
  if (it == names.end()) throw ContractError("target column '" + target + "' not in frame");
  return static_cast<std::size_t>(it - names.begin());
}

const std::vector<double>& SeriesFrame::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ContractError("column '" + name + "' not in frame");
  return columns[static_cast<std::size_t>(it - names.begin())];
}

SeriesFrame read_frame_csv(const std::filesystem::path& path, const std::string& target,
                           IngestReport* report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ContractError(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "timestamp") {
    throw ContractError(path.string() + ": header must be 'timestamp,<asset>,...'");
  }
  SeriesFrame frame;
  frame.names.assign(header.begin() + 1, header.end());
  frame.columns.resize(frame.names.size());
  frame.target = target.empty() ? frame.names.front() : target;
  frame.target_index();

  IngestReport local;
  std::vector<double> row(frame.names.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    ++local.rows_read;
    const auto fields = split_csv_line(line);
    std::int64_t seconds = 0;
    if (fields.empty() || !parse_int(fields[0], seconds)) {
      throw ContractError(path.string() + ":" + std::to_string(line_no) + ": bad timestamp");
    }
    if (seconds % 3600 != 0) {
      throw ContractError(path.string() + ":" + std::to_string(line_no) +
                          ": timestamp is not on an hour boundary");
    }
    const std::int64_t hour = seconds / 3600;
    if (!frame.timestamps.empty() && hour <= frame.timestamps.back()) {
      throw ContractError(path.string() + ":" + std::to_string(line_no) +
                          ": timestamps must be strictly increasing");
    }
    bool ok = fields.size() == header.size();
    for (std::size_t c = 0; ok && c < row.size(); ++c) ok = parse_double(fields[c + 1], row[c]);
    if (!ok) {
      ++local.rows_dropped;
      continue;
    }
    frame.timestamps.push_back(hour);
    for (std::size_t c = 0; c < row.size(); ++c) frame.columns[c].push_back(row[c]);
  }
  local.missing_hours = count_missing_hours(frame.timestamps);
  if (report) *report = local;
  return frame;
}

void write_frame_csv(const SeriesFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "timestamp";
  for (const auto& n : frame.names) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    out << frame.timestamps[r] * 3600;
    for (const auto& col : frame.columns) out << ',' << col[r];
    out << '\n';
  }
}

SeriesFrame join_columns(const std::vector<SeriesFrame>& parts, const std::string& target,
                         IngestReport* report) {
  if (parts.empty()) throw ContractError("join_columns: nothing to join");
  std::map<std::int64_t, std::size_t> seen;
  std::size_t total_columns = 0;
  for (const auto& p : parts) {
    for (auto t : p.timestamps) ++seen[t];
    total_columns += p.names.size();
  }
  SeriesFrame out;
  out.columns.resize(total_columns);
  for (const auto& p : parts) out.names.insert(out.names.end(), p.names.begin(), p.names.end());
  out.target = target.empty() ? out.names.front() : target;
  std::size_t dropped = 0;
  for (const auto& [t, count] : seen) {
    if (count == parts.size()) {
      out.timestamps.push_back(t);
    } else {
      ++dropped;
    }
  }
  std::size_t col = 0;
  for (const auto& p : parts) {
    for (std::size_t c = 0; c < p.names.size(); ++c, ++col) {
      std::size_t j = 0;
      for (std::size_t r = 0; r < p.rows(); ++r) {
        while (j < out.timestamps.size() && out.timestamps[j] < p.timestamps[r]) ++j;
        if (j < out.timestamps.size() && out.timestamps[j] == p.timestamps[r]) {
          out.columns[col].push_back(p.columns[c][r]);
        }
      }
    }
  }
  if (report) {
    report->rows_read = seen.size();
    report->rows_dropped = dropped;
    report->missing_hours = count_missing_hours(out.timestamps);
  }
  out.target_index();
  return out;
}

double window_median(std::span<const double> window) {
  if (window.empty()) throw ContractError("median of an empty window");
  std::vector<double> w(window.begin(), window.end());
  const std::size_t mid = w.size() / 2;
  std::nth_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(mid), w.end());
  const double upper = w[mid];
  if (w.size() % 2 == 1) return upper;
  const double lower = *std::max_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

MedianScaled moving_median_scale(std::span<const double> series, std::size_t window,
                                 std::size_t shift) {
  if (window == 0) throw ContractError("moving_median_scale: window must be >= 1");
  if (series.size() <= window + shift) {
    throw ContractError("moving_median_scale: series of length " + std::to_string(series.size()) +
                        " needs more than W+H = " + std::to_string(window + shift) + " values");
  }
  MedianScaled out;
  out.offset = window + shift - 1;
  out.values.reserve(series.size() - out.offset);
  for (std::size_t t = out.offset; t < series.size(); ++t) {
    const std::size_t end = t - shift + 1;  // exclusive
    const double med = window_median(series.subspan(end - window, window));
    if (!(med > 0.0)) {
      throw DegenerateWindowError("moving_median_scale: median of the window for index " +
                                      std::to_string(t) + " is not positive",
                                  t);
    }
    out.values.push_back(series[t] / med);
  }
  return out;
}

MinMaxScaled minmax_fit_apply(std::span<const double> train, std::span<const double> test) {
  if (train.empty()) throw ContractError("minmax_fit_apply: empty training part");
  const double maximum = *std::max_element(train.begin(), train.end());
  if (!(maximum > 0.0)) {
    throw ContractError("minmax_fit_apply: training maximum must be positive");
  }
  MinMaxScaled out;
  out.maximum = maximum;
  out.train.reserve(train.size());
  out.test.reserve(test.size());
  for (double v : train) out.train.push_back(v / maximum);
  for (double v : test) out.test.push_back(v / maximum);
  return out;
}

Windows make_windows(const SeriesFrame& frame, std::size_t seq_len, std::size_t horizon) {
  if (seq_len == 0 || horizon == 0) throw ContractError("make_windows: seq_len and horizon must be >= 1");
  const std::size_t n = frame.rows();
  if (n < seq_len + horizon) {
    throw ContractError("make_windows: " + std::to_string(n) + " rows cannot hold seq_len " +
                        std::to_string(seq_len) + " plus horizon " + std::to_string(horizon));
  }
  const std::size_t count = n - seq_len - horizon + 1;
  const std::size_t d = frame.columns.size();
  const auto& target = frame.columns[frame.target_index()];
  std::vector<double> x(count * seq_len * d), y(count * horizon);
  Windows w;
  w.end_rows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t end = i + seq_len - 1;
    w.end_rows.push_back(end);
    for (std::size_t s = 0; s < seq_len; ++s) {
      for (std::size_t c = 0; c < d; ++c) x[(i * seq_len + s) * d + c] = frame.columns[c][i + s];
    }
    for (std::size_t h = 0; h < horizon; ++h) y[i * horizon + h] = target[end + 1 + h];
  }
  w.inputs = Tensor({count, seq_len, d}, std::move(x));
  w.targets = Tensor({count, horizon}, std::move(y));
  return w;
}

SplitCounts split_train_test(std::size_t samples, double ratio) {
  if (samples < 2) throw ContractError("split_train_test: needs at least 2 samples");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("split_train_test: ratio must be in (0,1)");
  auto train = static_cast<std::size_t>(std::floor(static_cast<double>(samples) * ratio));
  train = std::clamp<std::size_t>(train, 1, samples - 1);
  return {train, samples - train};
}

PreparedData prepare_dataset(const SeriesFrame& frame, const PrepareOptions& options) {
  const std::size_t target = frame.target_index();
  SeriesFrame scaled;
  scaled.names = frame.names;
  scaled.target = frame.target;
  std::size_t offset = 0;
  for (const auto& col : frame.columns) {
    auto m = moving_median_scale(col, options.median_window, options.horizon);
    offset = m.offset;
    scaled.columns.push_back(std::move(m.values));
  }
  scaled.timestamps.assign(frame.timestamps.begin() + static_cast<std::ptrdiff_t>(offset),
                           frame.timestamps.end());

  const std::size_t usable = scaled.rows();
  if (usable < options.seq_len + options.horizon + 1) {
    throw ContractError("prepare_dataset: only " + std::to_string(usable) +
                        " rows remain after the moving-median stage");
  }
  const std::size_t windows = usable - options.seq_len - options.horizon + 1;
  const SplitCounts split = split_train_test(windows, options.train_ratio);
  const std::size_t train_rows = split.train + options.seq_len + options.horizon - 1;

  PreparedData out;
  out.scaler.median_window = options.median_window;
  out.scaler.shift = options.horizon;
  for (auto& col : scaled.columns) {
    const std::span<const double> all(col);
    auto mm = minmax_fit_apply(all.first(train_rows), all.subspan(train_rows));
    out.scaler.maxima.push_back(mm.maximum);
    std::copy(mm.train.begin(), mm.train.end(), col.begin());
    std::copy(mm.test.begin(), mm.test.end(), col.begin() + static_cast<std::ptrdiff_t>(train_rows));
  }

  const Windows w = make_windows(scaled, options.seq_len, options.horizon);
  out.x_train = [&] {
    const std::size_t row = options.seq_len * scaled.columns.size();
    return Tensor({split.train, options.seq_len, scaled.columns.size()},
                  std::vector<double>(w.inputs.data(), w.inputs.data() + split.train * row));
  }();
  out.x_test = [&] {
    const std::size_t row = options.seq_len * scaled.columns.size();
    return Tensor({split.test, options.seq_len, scaled.columns.size()},
                  std::vector<double>(w.inputs.data() + split.train * row,
                                      w.inputs.data() + windows * row));
  }();
  out.y_train = Tensor({split.train, options.horizon},
                       std::vector<double>(w.targets.data(),
                                           w.targets.data() + split.train * options.horizon));
  out.y_test = Tensor({split.test, options.horizon},
                      std::vector<double>(w.targets.data() + split.train * options.horizon,
                                          w.targets.data() + windows * options.horizon));
  out.target_index = target;
  out.usable_rows = usable;
  out.train_rows = train_rows;
  out.names = frame.names;
  return out;
}

SeriesFrame make_synthetic_frame(const SyntheticSpec& spec, std::uint64_t seed,
                                 const std::string& name) {
  Pcg32 rng(seed, 0xda7a);
  const double innovation = spec.noise_std * std::sqrt(1.0 - spec.ar_coefficient * spec.ar_coefficient);
  SeriesFrame f;
  f.names = {name};
  f.target = name;
  f.columns.resize(1);
  double noise = spec.noise_std * standard_normal(rng);
  for (std::size_t t = 0; t < spec.length; ++t) {
    if (t > 0) noise = spec.ar_coefficient * noise + innovation * standard_normal(rng);
    const double tt = static_cast<double>(t);
    const double value = spec.offset +
                         spec.amplitude_fast * std::sin(2.0 * std::numbers::pi * tt / spec.period_fast) +
                         spec.amplitude_slow * std::sin(2.0 * std::numbers::pi * tt / spec.period_slow) +
                         noise;
    f.timestamps.push_back(spec.start_hour + static_cast<std::int64_t>(t));
    f.columns[0].push_back(value);
  }
  return f;
}

}  // namespace tkan
