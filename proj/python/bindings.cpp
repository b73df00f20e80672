// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tkan/bench/experiment.hpp"
#include "tkan/core/errors.hpp"
#include "tkan/spline/kan.hpp"

namespace py = pybind11;
using namespace tkan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

Tensor from_numpy(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

py::dict prepared_to_dict(const PreparedData& d) {
  py::dict out;
  out["x_train"] = to_numpy(d.x_train);
  out["y_train"] = to_numpy(d.y_train);
  out["x_test"] = to_numpy(d.x_test);
  out["y_test"] = to_numpy(d.y_test);
  out["target_index"] = d.target_index;
  out["train_rows"] = d.train_rows;
  out["usable_rows"] = d.usable_rows;
  out["names"] = d.names;
  return out;
}

}  // namespace

PYBIND11_MODULE(_tkan, m) {
  m.doc() = "TKAN forecasting benchmark core";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);
  py::register_exception<FetchError>(m, "FetchError", PyExc_IOError);

  m.def(
      "bspline_basis",
      [](const Array& x, double low, double high, std::size_t grid_size, std::size_t order) {
        const auto grid = KnotGrid::uniform(low, high, grid_size, order);
        return to_numpy(bspline_basis(std::span<const double>(x.data(), x.size()), grid));
      },
      py::arg("x"), py::arg("low") = -1.0, py::arg("high") = 1.0, py::arg("grid_size") = 5,
      py::arg("order") = 3, "B-spline basis values, one row per point.");

  m.def(
      "r_squared",
      [](const Array& pred, const Array& truth) {
        return r_squared(std::span<const double>(pred.data(), pred.size()),
                         std::span<const double>(truth.data(), truth.size()));
      },
      py::arg("pred"), py::arg("truth"));

  m.def(
      "synthetic_series",
      [](std::size_t length, std::uint64_t seed) {
        SyntheticSpec s;
        s.length = length;
        const SeriesFrame f = make_synthetic_frame(s, seed);
        return py::make_tuple(f.timestamps, f.columns.front());
      },
      py::arg("length") = 5000, py::arg("seed") = 0,
      "(hours, values) of the default two-sine plus AR(1) series.");

  m.def(
      "prepare",
      [](const Array& values, std::size_t seq_len, std::size_t horizon, std::size_t median_window,
         double train_ratio) {
        if (values.ndim() != 2) throw DimensionError("prepare: expected [rows x columns]");
        SeriesFrame f;
        const std::size_t rows = values.shape(0), cols = values.shape(1);
        for (std::size_t c = 0; c < cols; ++c) {
          f.names.push_back("c" + std::to_string(c));
          f.columns.emplace_back(rows);
          for (std::size_t r = 0; r < rows; ++r) f.columns[c][r] = values.at(r, c);
        }
        for (std::size_t r = 0; r < rows; ++r) f.timestamps.push_back(static_cast<std::int64_t>(r));
        f.target = f.names.front();
        PrepareOptions o;
        o.seq_len = seq_len;
        o.horizon = horizon;
        o.median_window = median_window;
        o.train_ratio = train_ratio;
        return prepared_to_dict(prepare_dataset(f, o));
      },
      py::arg("values"), py::arg("seq_len") = 30, py::arg("horizon") = 1,
      py::arg("median_window") = kHoursPerTwoWeeks, py::arg("train_ratio") = 0.8,
      "Scale, window and split a [rows x columns] array; column 0 is the target.");

  m.def(
      "naive_last_value",
      [](const Array& x, std::size_t horizon, std::size_t target_index) {
        return to_numpy(naive_last_value(from_numpy(x), horizon, target_index));
      },
      py::arg("x"), py::arg("horizon"), py::arg("target_index") = 0);

  py::class_<SequenceModel>(m, "Model")
      .def(py::init([](const std::string& kind, std::size_t input_dim, std::size_t horizon,
                       std::size_t units, std::uint64_t seed) {
             ModelSpec s;
             s.kind = parse_model_kind(kind);
             s.input_dim = input_dim;
             s.horizon = horizon;
             s.units = units;
             return build_model(s, seed);
           }),
           py::arg("kind"), py::arg("input_dim"), py::arg("horizon") = 1, py::arg("units") = 100,
           py::arg("seed") = 0)
      .def_static(
          "load", [](const std::filesystem::path& p) { return checkpoint_load_model(p); },
          py::arg("path"))
      .def(
          "predict",
          [](const SequenceModel& model, const Array& x) {
            const Tensor in = from_numpy(x);
            Tensor out;
            {
              py::gil_scoped_release release;
              out = model.forward(in);
            }
            return to_numpy(out);
          },
          py::arg("x"))
      .def("parameter_count", [](SequenceModel& model) {
        std::size_t n = 0;
        for (const auto& p : model.parameters()) n += p.tensor->size();
        return n;
      });

  m.def(
      "run_benchmark",
      [](const std::filesystem::path& config, const std::filesystem::path& out) {
        ExperimentConfig c = load_config(config);
        if (!out.empty()) c.output_dir = out;
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_benchmark(c);
        }
        py::list rows;
        for (const auto& run : r.runs) {
          py::dict d;
          d["model"] = to_string(run.model);
          d["horizon"] = run.horizon;
          d["seed"] = run.seed;
          d["r2"] = run.r2;
          d["rmse"] = run.rmse;
          d["epochs"] = run.epochs;
          d["ok"] = run.ok;
          rows.append(d);
        }
        return rows;
      },
      py::arg("config"), py::arg("out") = std::filesystem::path{},
      "Run a configured benchmark and return one dict per run.");

  m.def(
      "aggregate",
      [](const std::vector<double>& v) {
        const Aggregate a = aggregate(v);
        return py::make_tuple(a.mean, a.std);
      },
      py::arg("values"), "(mean, sample std)");
}
