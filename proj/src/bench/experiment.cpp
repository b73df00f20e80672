// SPDX-License-Identifier: Apache-2.0
#include "tkan/bench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "tkan/bench/bundle.hpp"
#include "tkan/core/errors.hpp"

namespace tkan {

using nlohmann::json;

namespace {

std::string to_string(CandidateActivation a) {
  return a == CandidateActivation::sigmoid ? "sigmoid" : "tanh";
}

CandidateActivation parse_activation(const std::string& s) {
  if (s == "sigmoid") return CandidateActivation::sigmoid;
  if (s == "tanh") return CandidateActivation::tanh;
  throw ContractError("candidate_activation must be 'sigmoid' or 'tanh', got '" + s + "'");
}

json tkan_to_json(const TkanOptions& o) {
  return json{{"spline_orders", o.spline_orders},
              {"grid_size", o.grid_size},
              {"kan_in", o.kan_in},
              {"kan_out", o.kan_out},
              {"spline_domain", {o.kan.domain_low, o.kan.domain_high}},
              {"kan_base", o.kan.use_base},
              {"candidate_activation", to_string(o.candidate_activation)},
              {"full_matrix_memory", o.full_matrix_memory}};
}

TkanOptions tkan_from_json(const json& j, TkanOptions o = {}) {
  o.spline_orders = j.value("spline_orders", o.spline_orders);
  o.grid_size = j.value("grid_size", o.grid_size);
  o.kan_in = j.value("kan_in", o.kan_in);
  o.kan_out = j.value("kan_out", o.kan_out);
  if (j.contains("spline_domain")) {
    const auto d = j.at("spline_domain").get<std::vector<double>>();
    if (d.size() != 2) throw ContractError("spline_domain must be [low, high]");
    o.kan.domain_low = d[0];
    o.kan.domain_high = d[1];
  }
  o.kan.use_base = j.value("kan_base", o.kan.use_base);
  if (j.contains("candidate_activation")) {
    o.candidate_activation = parse_activation(j.at("candidate_activation").get<std::string>());
  }
  o.full_matrix_memory = j.value("full_matrix_memory", o.full_matrix_memory);
  return o;
}

Cell make_cell(const ModelSpec& spec, std::size_t input_dim, Initializer& init) {
  switch (spec.kind) {
    case ModelKind::tkan: return make_tkan_cell(input_dim, spec.units, spec.tkan, init);
    case ModelKind::lstm: return make_lstm_cell(input_dim, spec.units, init);
    case ModelKind::gru: return make_gru_cell(input_dim, spec.units, init);
    case ModelKind::naive: break;
  }
  throw ContractError("build_model: the naive baseline has no trainable model");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

json to_json(const ModelSpec& spec) {
  return json{{"kind", to_string(spec.kind)},
              {"input_dim", spec.input_dim},
              {"horizon", spec.horizon},
              {"units", spec.units},
              {"tkan", tkan_to_json(spec.tkan)}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec s;
  s.kind = parse_model_kind(j.at("kind").get<std::string>());
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.horizon = j.at("horizon").get<std::size_t>();
  s.units = j.at("units").get<std::size_t>();
  if (j.contains("tkan")) s.tkan = tkan_from_json(j.at("tkan"));
  return s;
}

SequenceModel build_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.input_dim == 0 || spec.horizon == 0 || spec.units == 0) {
    throw ContractError("build_model: input_dim, horizon and units must be positive");
  }
  Initializer init(seed);
  SequenceModel model;
  model.kind = spec.kind;
  model.layers.push_back({make_cell(spec, spec.input_dim, init), true});
  model.layers.push_back({make_cell(spec, spec.units, init), false});
  model.head.kernel = init.glorot(spec.units, spec.horizon, {spec.units, spec.horizon});
  model.head.bias = Tensor::zeros({spec.horizon});
  return model;
}

Tensor naive_last_value(const Tensor& inputs, std::size_t horizon, std::size_t target_index) {
  if (inputs.rank() != 3 || inputs.dim(1) == 0) {
    throw DimensionError("naive_last_value: expected [N x seq_len x d] with seq_len >= 1, got " +
                         shape_string(inputs.shape()));
  }
  if (target_index >= inputs.dim(2)) {
    throw DimensionError("naive_last_value: target column " + std::to_string(target_index) +
                         " outside " + shape_string(inputs.shape()));
  }
  const std::size_t n = inputs.dim(0), last = inputs.dim(1) - 1;
  std::vector<double> out(n * horizon);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = inputs.at(i, last, target_index);
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(i * horizon), horizon, v);
  }
  return Tensor({n, horizon}, std::move(out));
}

// Checkpoints ---------------------------------------------------------------------

void checkpoint_save(SequenceModel& model, const ModelSpec& spec,
                     const std::filesystem::path& path) {
  TensorBundle bundle;
  bundle.meta = json{{"format", "tkan-checkpoint"}, {"model", to_json(spec)}};
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (const auto* cell = std::get_if<TkanCell>(&model.layers[l].cell)) {
      for (std::size_t s = 0; s < cell->sublayers.size(); ++s) {
        const auto& g = cell->sublayers[s].phi.grid;
        bundle.tensor_meta["layer" + std::to_string(l) + ".rkan" + std::to_string(s) +
                           ".phi.spline_coeffs"] =
            json{{"grid",
                  {{"domain_low", g.domain_low},
                   {"domain_high", g.domain_high},
                   {"grid_size", g.grid_size},
                   {"order", g.order}}}};
      }
    }
  }
  for (const auto& p : model.parameters()) bundle.tensors.emplace_back(p.name, *p.tensor);
  save_bundle(bundle, path);
}

void checkpoint_load(const std::filesystem::path& path, SequenceModel& model) {
  const TensorBundle bundle = load_bundle(path);
  if (bundle.meta.value("format", "") != "tkan-checkpoint") {
    throw CheckpointError(path.string() + ": not a model checkpoint");
  }
  auto params = model.parameters();
  if (params.size() != bundle.tensors.size()) {
    throw CheckpointError(path.string() + ": checkpoint holds " +
                          std::to_string(bundle.tensors.size()) + " tensors, model expects " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, tensor] = bundle.tensors[i];
    if (name != params[i].name) {
      throw CheckpointError(path.string() + ": expected tensor '" + params[i].name +
                            "' at position " + std::to_string(i) + ", found '" + name + "'");
    }
    if (tensor.shape() != params[i].tensor->shape()) {
      throw CheckpointError(path.string() + ": tensor '" + name + "' has shape " +
                            shape_string(tensor.shape()) + " but the model expects " +
                            shape_string(params[i].tensor->shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = bundle.tensors[i].second;
}

SequenceModel checkpoint_load_model(const std::filesystem::path& path, ModelSpec* spec_out) {
  const TensorBundle bundle = load_bundle(path);
  ModelSpec spec;
  try {
    spec = model_spec_from_json(bundle.meta.at("model"));
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": manifest lacks a model description: " + e.what());
  }
  SequenceModel model = build_model(spec, 0);
  checkpoint_load(path, model);
  if (spec_out) *spec_out = spec;
  return model;
}

// Configuration ---------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (models.empty()) throw ContractError("config: no models");
  if (horizons.empty()) throw ContractError("config: no horizons");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (horizons[i] == 0 || (i > 0 && horizons[i] <= horizons[i - 1])) {
      throw ContractError("config: horizons must be positive and strictly increasing");
    }
  }
  if (seeds.empty()) throw ContractError("config: no seeds");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ContractError("config: seeds must be distinct");
  }
  if (units == 0 || seq_len == 0) throw ContractError("config: units and seq_len must be positive");
  if (workers == 0) throw ContractError("config: workers must be >= 1");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("models")) {
    c.models.clear();
    for (const auto& m : j.at("models")) c.models.push_back(parse_model_kind(m.get<std::string>()));
  }
  if (j.contains("model")) c.models = {parse_model_kind(j.at("model").get<std::string>())};
  c.units = j.value("units", c.units);
  c.horizons = j.value("horizons", c.horizons);
  c.seeds = j.value("seeds", c.seeds);
  c.seq_len = j.value("seq_len", c.seq_len);
  c.tkan = tkan_from_json(j, c.tkan);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    c.data.path = d.value("path", std::string{});
    c.data.target = d.value("target", std::string{});
    c.data.median_window = d.value("median_window", c.data.median_window);
    c.data.train_ratio = d.value("train_ratio", c.data.train_ratio);
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      SyntheticSpec spec;
      spec.length = s.value("length", spec.length);
      spec.offset = s.value("offset", spec.offset);
      spec.amplitude_fast = s.value("amplitude_fast", spec.amplitude_fast);
      spec.period_fast = s.value("period_fast", spec.period_fast);
      spec.amplitude_slow = s.value("amplitude_slow", spec.amplitude_slow);
      spec.period_slow = s.value("period_slow", spec.period_slow);
      spec.ar_coefficient = s.value("ar_coefficient", spec.ar_coefficient);
      spec.noise_std = s.value("noise_std", spec.noise_std);
      c.data.synthetic = spec;
      c.data.synthetic_seed = s.value("seed", std::uint64_t{0});
    }
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    auto& f = c.training;
    f.batch_size = t.value("batch_size", f.batch_size);
    f.max_epochs = t.value("max_epochs", f.max_epochs);
    f.learning_rate = t.value("learning_rate", f.learning_rate);
    f.min_learning_rate = t.value("min_learning_rate", f.min_learning_rate);
    f.validation_fraction = t.value("validation_fraction", f.validation_fraction);
    f.early_stopping_patience = t.value("early_stopping_patience", f.early_stopping_patience);
    f.plateau_patience = t.value("plateau_patience", f.plateau_patience);
    f.plateau_factor = t.value("plateau_factor", f.plateau_factor);
  }
  c.output_dir = j.value("output_dir", c.output_dir.string());
  c.workers = j.value("workers", c.workers);
  c.save_checkpoints = j.value("save_checkpoints", c.save_checkpoints);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  try {
    return config_from_json(json::parse(in, nullptr, true, /*ignore_comments=*/true));
  } catch (const json::exception& e) {
    throw ContractError("config " + path.string() + ": " + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json models = json::array();
  for (auto m : c.models) models.push_back(to_string(m));
  json j = tkan_to_json(c.tkan);
  j["models"] = models;
  j["units"] = c.units;
  j["horizons"] = c.horizons;
  j["seeds"] = c.seeds;
  j["seq_len"] = c.seq_len;
  j["data"] = {{"path", c.data.path.string()},
               {"target", c.data.target},
               {"median_window", c.data.median_window},
               {"train_ratio", c.data.train_ratio}};
  if (c.data.synthetic) {
    const auto& s = *c.data.synthetic;
    j["data"]["synthetic"] = {{"length", s.length},
                              {"offset", s.offset},
                              {"amplitude_fast", s.amplitude_fast},
                              {"period_fast", s.period_fast},
                              {"amplitude_slow", s.amplitude_slow},
                              {"period_slow", s.period_slow},
                              {"ar_coefficient", s.ar_coefficient},
                              {"noise_std", s.noise_std},
                              {"seed", c.data.synthetic_seed}};
  }
  const auto& f = c.training;
  j["training"] = {{"batch_size", f.batch_size},
                   {"max_epochs", f.max_epochs},
                   {"learning_rate", f.learning_rate},
                   {"min_learning_rate", f.min_learning_rate},
                   {"validation_fraction", f.validation_fraction},
                   {"early_stopping_patience", f.early_stopping_patience},
                   {"plateau_patience", f.plateau_patience},
                   {"plateau_factor", f.plateau_factor}};
  j["output_dir"] = c.output_dir.string();
  j["workers"] = c.workers;
  j["save_checkpoints"] = c.save_checkpoints;
  return j;
}

SeriesFrame load_frame(const DataConfig& data, IngestReport* report) {
  if (data.synthetic) {
    SeriesFrame f = make_synthetic_frame(*data.synthetic, data.synthetic_seed);
    if (report) *report = {f.rows(), 0, 0};
    return f;
  }
  if (data.path.empty()) throw ContractError("config: data.path is not set");
  return read_frame_csv(data.path, data.target, report);
}

PrepareOptions prepare_options(const ExperimentConfig& config, std::size_t horizon) {
  PrepareOptions o;
  o.median_window = config.data.median_window;
  o.seq_len = config.seq_len;
  o.horizon = horizon;
  o.train_ratio = config.data.train_ratio;
  return o;
}

// Runs ------------------------------------------------------------------------------

std::string run_name(ModelKind kind, std::size_t horizon, std::uint64_t seed) {
  return to_string(kind) + "_h" + std::to_string(horizon) + "_s" + std::to_string(seed);
}

RunResult run_single(const ExperimentConfig& config, const PreparedData& data, ModelKind kind,
                     std::size_t horizon, std::uint64_t seed,
                     const std::filesystem::path& checkpoint_path) {
  RunResult r;
  r.model = kind;
  r.horizon = horizon;
  r.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    Tensor pred;
    if (kind == ModelKind::naive) {
      pred = naive_last_value(data.x_test, horizon, data.target_index);
    } else {
      ModelSpec spec;
      spec.kind = kind;
      spec.input_dim = data.x_train.dim(2);
      spec.horizon = horizon;
      spec.units = config.units;
      spec.tkan = config.tkan;
      SequenceModel model = build_model(spec, seed);
      ModelTrainer trainer(model);
      FitConfig fc = config.training;
      fc.seed = seed;
      r.history = fit(trainer, data.x_train, data.y_train, fc);
      r.epochs = r.history.epochs_run();
      r.best_epoch = r.history.best_epoch;
      pred = Tensor::zeros(data.y_test.shape());
      std::vector<double> all;
      all.reserve(data.y_test.size());
      for (std::size_t b = 0; b < data.x_test.dim(0); b += 256) {
        const std::size_t e = std::min(data.x_test.dim(0), b + 256);
        const Tensor p = model.forward(take_rows(data.x_test, b, e));
        all.insert(all.end(), p.values().begin(), p.values().end());
      }
      pred = Tensor(data.y_test.shape(), std::move(all));
      if (!checkpoint_path.empty()) checkpoint_save(model, spec, checkpoint_path);
    }
    r.r2 = r_squared(pred.values(), data.y_test.values());
    r.rmse = std::sqrt(mse(pred, data.y_test));
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

Aggregate aggregate(const std::vector<double>& values) {
  if (values.empty()) throw ContractError("aggregate: no rows");
  Aggregate a;
  a.count = values.size();
  double total = 0.0;
  for (double v : values) total += v;
  a.mean = total / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

std::map<std::pair<ModelKind, std::size_t>, Aggregate> RunReport::r2_table() const {
  std::map<std::pair<ModelKind, std::size_t>, std::vector<double>> grouped;
  for (const auto& r : runs) {
    if (r.ok) grouped[{r.model, r.horizon}].push_back(r.r2);
  }
  std::map<std::pair<ModelKind, std::size_t>, Aggregate> out;
  for (const auto& [key, values] : grouped) out[key] = aggregate(values);
  return out;
}

RunReport run_benchmark(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  const SeriesFrame frame = load_frame(config.data);

  std::map<std::size_t, PreparedData> prepared;
  for (std::size_t h : config.horizons) prepared[h] = prepare_dataset(frame, prepare_options(config, h));

  struct Job {
    ModelKind model;
    std::size_t horizon;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t h : config.horizons) {
    for (ModelKind m : config.models) {
      for (std::uint64_t s : config.seeds) jobs.push_back({m, h, s});
    }
  }

  RunReport report;
  report.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const std::string name = run_name(job.model, job.horizon, job.seed);
      const auto ckpt = config.save_checkpoints && job.model != ModelKind::naive
                            ? config.output_dir / ("checkpoint_" + name + ".bin")
                            : std::filesystem::path{};
      RunResult r = run_single(config, prepared.at(job.horizon), job.model, job.horizon, job.seed, ckpt);
      if (r.ok && job.model != ModelKind::naive) {
        write_history_csv(r.history, config.output_dir / ("history_" + name + ".csv"));
      }
      report.runs[i] = std::move(r);
    }
  };
  const std::size_t n_threads = std::min(config.workers, jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  report.complete = std::all_of(report.runs.begin(), report.runs.end(),
                                [](const RunResult& r) { return r.ok; });
  write_report_csv(report, config.output_dir / "report.csv");
  write_aggregate_csv(report, config.output_dir / "report_agg.csv");
  write_timings_csv(report, config.output_dir / "timings.csv");
  return report;
}

void write_report_csv(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "model,horizon,seed,r2,rmse,epochs,best_epoch,status\n";
  for (const auto& r : report.runs) {
    std::string status = r.ok ? "ok" : "failed: " + r.error;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << to_string(r.model) << ',' << r.horizon << ',' << r.seed << ',' << fmt(r.r2) << ','
        << fmt(r.rmse) << ',' << r.epochs << ',' << r.best_epoch << ',' << status << '\n';
  }
  if (!report.complete) out << "# incomplete: at least one run failed\n";
}

RunReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("model,horizon,seed,r2", 0) != 0) {
    throw ContractError(path.string() + ": not a report.csv file");
  }
  RunReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      report.complete = false;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() < 8) throw ContractError(path.string() + ": malformed row '" + line + "'");
    RunResult r;
    r.model = parse_model_kind(f[0]);
    r.horizon = std::stoul(f[1]);
    r.seed = std::stoull(f[2]);
    r.r2 = std::stod(f[3]);
    r.rmse = std::stod(f[4]);
    r.epochs = std::stoul(f[5]);
    r.best_epoch = std::stoul(f[6]);
    r.ok = f[7] == "ok";
    if (!r.ok) {
      r.error = f[7];
      report.complete = false;
    }
    report.runs.push_back(std::move(r));
  }
  return report;
}

namespace {

std::vector<ModelKind> models_in(const RunReport& report) {
  std::vector<ModelKind> out;
  for (const auto& r : report.runs) {
    if (std::find(out.begin(), out.end(), r.model) == out.end()) out.push_back(r.model);
  }
  return out;
}

std::vector<std::size_t> horizons_in(const RunReport& report) {
  std::set<std::size_t> hs;
  for (const auto& r : report.runs) hs.insert(r.horizon);
  return {hs.begin(), hs.end()};
}

}  // namespace

void write_aggregate_csv(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto models = models_in(report);
  const auto table = report.r2_table();
  out << "horizon";
  for (auto m : models) out << ',' << to_string(m) << "_mean";
  for (auto m : models) out << ',' << to_string(m) << "_std";
  out << '\n';
  for (std::size_t h : horizons_in(report)) {
    out << h;
    for (int pass = 0; pass < 2; ++pass) {
      for (auto m : models) {
        out << ',';
        const auto it = table.find({m, h});
        if (it != table.end()) out << fmt(pass == 0 ? it->second.mean : it->second.std);
      }
    }
    out << '\n';
  }
}

void write_timings_csv(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "model,horizon,seed,wall_seconds\n";
  for (const auto& r : report.runs) {
    out << to_string(r.model) << ',' << r.horizon << ',' << r.seed << ',' << fmt(r.wall_seconds)
        << '\n';
  }
}

std::string render_tables(const RunReport& report) {
  const auto models = models_in(report);
  const auto table = report.r2_table();
  std::ostringstream os;
  for (int pass = 0; pass < 2; ++pass) {
    os << (pass == 0 ? "Mean R2 over seeds\n\n" : "\nStandard deviation of R2 over seeds\n\n");
    os << "| Horizon |";
    for (auto m : models) os << ' ' << to_string(m) << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < models.size(); ++i) os << "---|";
    os << '\n';
    for (std::size_t h : horizons_in(report)) {
      os << "| " << h << " |";
      for (auto m : models) {
        const auto it = table.find({m, h});
        os << ' ' << (it == table.end() ? std::string("n/a")
                                         : fmt6(pass == 0 ? it->second.mean : it->second.std))
           << " |";
      }
      os << '\n';
    }
  }
  if (!report.complete) os << "\nWARNING: report is incomplete (failed runs excluded)\n";
  return os.str();
}

}  // namespace tkan
