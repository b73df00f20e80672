// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"
#include "tkan/bench/experiment.hpp"
#include "tkan/core/ops.hpp"
#include "tkan/core/rng.hpp"
#include "tkan/recurrent/sequence.hpp"
#include "tkan/spline/kan.hpp"
#include "tkan/training/training.hpp"

using namespace tkan;
using oracle::Vec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Vec row(const Tensor& t, std::size_t r) {
  const std::size_t n = t.dim(1);
  return Vec(t.data() + r * n, t.data() + (r + 1) * n);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1 -------------------------------------------------------------------------------

Outcome spline_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Pcg32 rng(2024, 1);
  double worst = 0.0, worst_unity = 0.0;
  std::size_t pairs = 0;
  while (pairs < 10000) {
    const std::size_t order = rng.next_below(5);
    const std::size_t grid_size = 1 + rng.next_below(10);
    const double low = -3.0 + 2.0 * rng.next_unit();
    const double high = low + 0.5 + 4.0 * rng.next_unit();
    const KnotGrid grid = KnotGrid::uniform(low, high, grid_size, order);
    std::vector<double> xs(50);
    for (double& x : xs) x = low + (high - low) * rng.next_unit();
    const Tensor basis = bspline_basis(xs, grid);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Vec ref = oracle::basis_row(xs[i], low, high, grid_size, order);
      double sum = 0.0;
      for (std::size_t r = 0; r < ref.size(); ++r) {
        worst = std::max(worst, std::abs(basis.at(i, r) - ref[r]));
        sum += basis.at(i, r);
      }
      worst_unity = std::max(worst_unity, std::abs(sum - 1.0));
    }
    pairs += xs.size();
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-12 && worst_unity <= 1e-10 && secs < 5.0,
          format("%zu pairs, max |diff| %.3g, max |sum-1| %.3g, %.2f s", pairs, worst,
                 worst_unity, secs)};
}

// 2 -------------------------------------------------------------------------------

template <typename CellT>
void randomize_cell(CellT& cell, std::uint64_t seed) {
  std::vector<NamedParam> params;
  append_parameters(cell, "c", params);
  testing_support::randomize(params, seed, 0.6);
}

Outcome forward_oracles() {
  const auto start = std::chrono::steady_clock::now();
  double worst[4] = {0, 0, 0, 0};
  for (std::uint64_t cfg = 0; cfg < 100; ++cfg) {
    Pcg32 rng(cfg, 2);
    const std::size_t d = 1 + rng.next_below(4), units = 1 + rng.next_below(5);
    const std::size_t batch = 1 + rng.next_below(3);
    TkanOptions opt;
    opt.kan_in = 1 + rng.next_below(4);
    opt.kan_out = 1 + rng.next_below(4);
    opt.grid_size = 2 + rng.next_below(6);
    opt.candidate_activation = cfg % 2 == 0 ? CandidateActivation::sigmoid : CandidateActivation::tanh;
    opt.full_matrix_memory = cfg % 3 == 0;
    opt.kan.use_base = cfg % 4 != 1;

    Initializer init(cfg);
    TkanCell tk = make_tkan_cell(d, units, opt, init);
    LstmCell ls = make_lstm_cell(d, units, init);
    GruCell gr = make_gru_cell(d, units, init);
    randomize_cell(tk, cfg);
    randomize_cell(ls, cfg + 500);
    randomize_cell(gr, cfg + 900);

    TkanState ts = zero_state(tk, batch);
    LstmState lst = zero_state(ls, batch);
    GruState gs = zero_state(gr, batch);
    std::vector<oracle::TkanStep> tref(batch);
    std::vector<oracle::LstmStep> lref(batch, {Vec(units, 0.0), Vec(units, 0.0)});
    std::vector<Vec> gref(batch, Vec(units, 0.0));
    for (auto& r : tref) r = {Vec(units, 0.0), Vec(units, 0.0), std::vector<Vec>(5, Vec(opt.kan_out, 0.0))};

    for (std::size_t t = 0; t < 4; ++t) {
      const Tensor x = rng_uniform(cfg, {batch, d}, -1.5, 1.5, 20 + t);
      // One RKAN sublayer in isolation, against its own oracle.
      const std::size_t l = t % 5;
      const auto [out, sub] = rkan_sublayer_step(x, ts.sub[l], tk.sublayers[l]);
      for (std::size_t b = 0; b < batch; ++b) {
        const auto r = oracle::rkan(row(x, b), row(ts.sub[l], b), tk.sublayers[l]);
        for (std::size_t m = 0; m < opt.kan_out; ++m) {
          worst[0] = std::max({worst[0], std::abs(out.at(b, m) - r.out[m]),
                               std::abs(sub.at(b, m) - r.sub[m])});
        }
      }
      ts = tkan_cell_step(x, ts, tk);
      lst = lstm_cell_step(x, lst, ls);
      gs = gru_cell_step(x, gs, gr);
      for (std::size_t b = 0; b < batch; ++b) {
        tref[b] = oracle::tkan(row(x, b), tref[b], tk);
        lref[b] = oracle::lstm(row(x, b), lref[b], ls);
        gref[b] = oracle::gru(row(x, b), gref[b], gr);
        for (std::size_t u = 0; u < units; ++u) {
          worst[1] = std::max({worst[1], std::abs(ts.h.at(b, u) - tref[b].h[u]),
                               std::abs(ts.c.at(b, u) - tref[b].c[u])});
          worst[2] = std::max({worst[2], std::abs(lst.h.at(b, u) - lref[b].h[u]),
                               std::abs(lst.c.at(b, u) - lref[b].c[u])});
          worst[3] = std::max(worst[3], std::abs(gs.h.at(b, u) - gref[b][u]));
        }
      }
    }
  }
  const double secs = seconds_since(start);
  const bool ok = *std::max_element(worst, worst + 4) <= 1e-12 && secs < 10.0;
  return {ok, format("100 configs, max |diff| rkan %.3g tkan %.3g lstm %.3g gru %.3g, %.2f s",
                     worst[0], worst[1], worst[2], worst[3], secs)};
}

// 3 -------------------------------------------------------------------------------

Outcome gradient_certification() {
  const auto start = std::chrono::steady_clock::now();
  ModelSpec spec;
  spec.kind = ModelKind::tkan;
  spec.input_dim = 3;
  spec.horizon = 2;
  spec.units = 8;
  SequenceModel model = build_model(spec, 1);
  const Tensor x = rng_uniform(5, {4, 8, 3}, 0.0, 1.0);
  const Tensor y = rng_uniform(6, {4, 2}, 0.0, 1.0);
  ModelTrainer trainer(model);
  std::vector<Tensor> grads;
  trainer.loss_and_gradients(x, y, grads);
  const auto fd = testing_support::finite_difference_check(
      [&] { return mse(model.forward(x), y); }, model.parameters(), grads, 1e-5);
  const double secs = seconds_since(start);
  return {fd.worst <= 1e-4 && secs < 120.0,
          format("%zu entries, worst relative error %.3g at %s, %.1f s", fd.checked, fd.worst,
                 fd.where.c_str(), secs)};
}

// 4 -------------------------------------------------------------------------------

Outcome zero_parameter_closed_form() {
  Initializer init(1);
  TkanCell cell = make_tkan_cell(3, 4, {}, init);
  std::vector<NamedParam> params;
  append_parameters(cell, "c", params);
  for (auto& p : params) *p.tensor = Tensor::zeros(p.tensor->shape());

  // From the zero carry, every timestep's input gives the same hidden value.
  double worst = 0.0;
  for (std::size_t t = 0; t < 12; ++t) {
    const Tensor x = rng_uniform(3, {2, 3}, -5.0, 5.0, t);
    const TkanState s = tkan_cell_step(x, zero_state(cell, 2), cell);
    for (double h : s.h.values()) worst = std::max(worst, std::abs(h - 0.1224593));
  }
  // Threaded through time the cell state accumulates, c_t = 0.5 c_{t-1} + 0.25.
  const Tensor seq = unroll(cell, rng_uniform(4, {1, 12, 3}, -5.0, 5.0), true);
  double worst_threaded = 0.0, c = 0.0;
  for (std::size_t t = 0; t < 12; ++t) {
    c = 0.5 * c + 0.25;
    worst_threaded = std::max(worst_threaded, std::abs(seq.at(0, t, 0) - 0.5 * std::tanh(c)));
  }
  return {worst <= 1e-6 && worst_threaded <= 1e-12,
          format("zero-state step max |h-0.1224593| %.3g over 12 inputs; threaded h_t follows "
                 "0.5*tanh(c_t) within %.3g (h_12 = %.7f)",
                 worst, worst_threaded, seq.at(0, 11, 0))};
}

// 5 -------------------------------------------------------------------------------

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

 private:
  std::vector<double> script_;
  std::size_t next_ = 0;
  std::map<double, double> seen_;
  Tensor w_ = Tensor::scalar(0.0);
};

Outcome protocol_fidelity() {
  FitConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 100;
  const Tensor x = Tensor::zeros({20, 1}), y = Tensor::zeros({20, 1});

  // Best at epoch 4, then ten worse epochs.
  ScriptedModel stop_model({1.0, 0.8, 0.7, 0.6, 0.65, 0.66, 0.61, 0.7, 0.9, 0.62, 0.8, 0.9, 0.95, 1.0});
  const FitHistory h = fit(stop_model, x, y, cfg);
  const double restored = stop_model.evaluate(x, y);
  const bool stop_ok = h.best_epoch == 4 && h.epochs_run() == 10 && h.stopped_early &&
                       std::abs(restored - h.best_val_loss) <= 1e-10;

  cfg.max_epochs = 8;
  ScriptedModel flat({0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  const FitHistory p = fit(flat, x, y, cfg);
  std::vector<double> lrs;
  for (const auto& e : p.epochs) lrs.push_back(e.lr);
  const bool plateau_ok = lrs.size() == 7 && lrs[0] == 1e-3 && lrs[2] == 1e-3 && lrs[3] == 5e-4 &&
                          lrs[5] == 5e-4 && lrs[6] == 2.5e-4;
  return {stop_ok && plateau_ok,
          format("stopped after epoch %zu (best %zu), restored loss %.12g vs %.12g; lr after "
                 "epochs 3/4/7: %g/%g/%g",
                 h.epochs_run(), h.best_epoch, restored, h.best_val_loss, lrs.size() > 2 ? lrs[2] : 0.0,
                 lrs.size() > 3 ? lrs[3] : 0.0, lrs.size() > 6 ? lrs[6] : 0.0)};
}

// 6 -------------------------------------------------------------------------------

Outcome pipeline_no_lookahead(const ExperimentConfig& desk) {
  const SeriesFrame base = load_frame(desk.data);
  std::size_t windows_checked = 0, mismatches = 0, cases = 0;
  for (std::size_t horizon : {1u, 6u, 12u}) {
    const PrepareOptions opt = prepare_options(desk, horizon);
    const PreparedData ref = prepare_dataset(base, opt);
    const std::size_t offset = opt.median_window + horizon - 1;
    const std::size_t n_train = ref.x_train.dim(0);
    const std::size_t d = ref.x_train.dim(2);
    // Spikes land among the rows seen only by test windows.
    const std::size_t first_test_row = offset + ref.train_rows;
    for (std::size_t spike : {first_test_row + 5, first_test_row + 200, base.rows() - 40}) {
      ++cases;
      SeriesFrame bumped = base;
      bumped.columns[ref.target_index][spike] *= 25.0;
      const PreparedData got = prepare_dataset(bumped, opt);
      if (!got.x_train.same_values(ref.x_train)) ++mismatches;
      for (std::size_t j = 0; j < ref.x_test.dim(0); ++j) {
        const std::size_t end_raw = offset + n_train + j + opt.seq_len - 1;
        if (end_raw + horizon >= spike) break;
        ++windows_checked;
        for (std::size_t s = 0; s < opt.seq_len; ++s) {
          for (std::size_t k = 0; k < d; ++k) {
            if (got.x_test.at(j, s, k) != ref.x_test.at(j, s, k)) {
              ++mismatches;
              s = opt.seq_len;
              break;
            }
          }
        }
      }
    }
  }
  return {mismatches == 0 && windows_checked > 0,
          format("%zu spike cases, %zu test windows ending before t*-H compared, %zu differ", cases,
                 windows_checked, mismatches)};
}

// 7 and 8 ------------------------------------------------------------------------

struct DeskResults {
  RunReport report;
  double seconds = 0.0;
};

std::vector<double> r2_values(const RunReport& r, ModelKind k, std::size_t h) {
  std::vector<double> out;
  for (const auto& run : r.runs) {
    if (run.model == k && run.horizon == h && run.ok) out.push_back(run.r2);
  }
  return out;
}

Outcome desk_learning(const DeskResults& desk) {
  const auto tk = r2_values(desk.report, ModelKind::tkan, 1);
  const auto nv = r2_values(desk.report, ModelKind::naive, 1);
  if (tk.size() != 5 || nv.size() != 5) return {false, "missing horizon-1 runs"};
  double secs = 0.0;
  for (const auto& run : desk.report.runs) {
    if (run.horizon == 1 && (run.model == ModelKind::tkan || run.model == ModelKind::naive)) {
      secs += run.wall_seconds;
    }
  }
  const double mt = median(tk), mn = median(nv);
  std::string per_seed;
  for (double v : tk) per_seed += format(" %.4f", v);
  return {mt >= 0.90 && mt - mn >= 0.05 && secs < 900.0,
          format("median R2 tkan %.4f (seeds:%s) vs naive %.4f, margin %.4f, %.0f s", mt,
                 per_seed.c_str(), mn, mt - mn, secs)};
}

Outcome desk_horizon_ordering(const DeskResults& desk, const std::vector<std::size_t>& horizons) {
  bool ok = true;
  std::string detail;
  const auto table = desk.report.r2_table();
  for (ModelKind k : {ModelKind::tkan, ModelKind::gru, ModelKind::lstm, ModelKind::naive}) {
    detail += to_string(k) + ":";
    double prev = INFINITY;
    for (std::size_t h : horizons) {
      const auto it = table.find({k, h});
      if (it == table.end() || it->second.count != 5) {
        ok = false;
        detail += " missing";
        continue;
      }
      detail += format(" %.4f", it->second.mean);
      if (it->second.mean > prev) ok = false;
      prev = it->second.mean;
    }
    detail += "; ";
  }
  for (std::size_t h : horizons) {
    if (h < 6) continue;
    const double naive = median(r2_values(desk.report, ModelKind::naive, h));
    for (ModelKind k : {ModelKind::tkan, ModelKind::gru, ModelKind::lstm}) {
      if (median(r2_values(desk.report, k, h)) < naive) {
        ok = false;
        detail += format("naive beats %s at H=%zu; ", to_string(k).c_str(), h);
      }
    }
  }
  return {ok, detail + format("%.0f s", desk.seconds)};
}

// 9 -------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome end_to_end_determinism(const fs::path& out) {
  ExperimentConfig c;
  c.models = {ModelKind::tkan, ModelKind::gru, ModelKind::lstm, ModelKind::naive};
  c.units = 4;
  c.horizons = {1, 3};
  c.seeds = {1, 2};
  c.seq_len = 8;
  SyntheticSpec s;
  s.length = 600;
  c.data.synthetic = s;
  c.data.synthetic_seed = 3;
  c.data.median_window = 48;
  c.training.batch_size = 32;
  c.training.max_epochs = 3;
  c.workers = 2;

  std::string reports[2];
  for (int i = 0; i < 2; ++i) {
    c.output_dir = out / ("determinism_" + std::to_string(i));
    fs::remove_all(c.output_dir);
    run_benchmark(c);
    reports[i] = slurp(c.output_dir / "report.csv");
  }
  const bool same = !reports[0].empty() && reports[0] == reports[1];
  return {same, format("report.csv %zu bytes, %s", reports[0].size(),
                       same ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  fs::path out = "acceptance_runs";
  fs::path config_path = TKAN_DESK_CONFIG;
  std::vector<int> only;
  app.add_option("--out", out, "Directory for benchmark artifacts");
  app.add_option("--config", config_path, "Desk-scale benchmark configuration");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };

  ExperimentConfig desk = load_config(config_path);
  fs::create_directories(out);
  desk.output_dir = out / "desk_scale";

  DeskResults results;
  if (wanted(7) || wanted(8)) {
    const auto start = std::chrono::steady_clock::now();
    results.report = run_benchmark(desk);
    results.seconds = seconds_since(start);
    std::fputs(render_tables(results.report).c_str(), stdout);
  }

  const std::vector<std::pair<int, std::function<Outcome()>>> checks{
      {1, spline_oracle},
      {2, forward_oracles},
      {3, gradient_certification},
      {4, zero_parameter_closed_form},
      {5, protocol_fidelity},
      {6, [&] { return pipeline_no_lookahead(desk); }},
      {7, [&] { return desk_learning(results); }},
      {8, [&] { return desk_horizon_ordering(results, desk.horizons); }},
      {9, [&] { return end_to_end_determinism(out); }},
  };
  int failures = 0;
  for (const auto& [n, check] : checks) {
    if (!wanted(n)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", n, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
