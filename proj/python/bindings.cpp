// Copyright 2026 The mmer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mmer/config.hpp"
#include "mmer/dataio.hpp"
#include "mmer/errors.hpp"
#include "mmer/gradcheck.hpp"
#include "mmer/metrics.hpp"
#include "mmer/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace mmer;

namespace {

LabelMatrix to_labels(const py::array_t<int, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DimensionError("label matrix must be two-dimensional");
  LabelMatrix m(a.shape(0), a.shape(1));
  const auto* p = a.data();
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    if (p[i] != 0 && p[i] != 1) throw ContractError("label matrix entries must be 0 or 1");
    m.cells[i] = static_cast<std::uint8_t>(p[i]);
  }
  return m;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["accuracy"] = r.accuracy;
  d["precision"] = r.precision;
  d["recall"] = r.recall;
  d["micro_f1"] = r.micro_f1;
  return d;
}

py::array_t<float> matrix_array(const FeatureMatrix& f) {
  py::array_t<float> out({f.rows, f.cols});
  std::copy(f.data.begin(), f.data.end(), out.mutable_data());
  return out;
}

template <typename T>
py::dict train_impl(const ModelConfig& config, const fs::path& manifest, const fs::path& out_dir,
                    bool train_metrics) {
  const auto data = load_dataset(manifest);
  MultimodalModel<T> model(config, data.manifest.shape());
  TrainOptions options;
  options.out_dir = out_dir;
  options.train_metrics = train_metrics;
  TrainResult result;
  {
    py::gil_scoped_release release;
    result = train(model, data, options);
  }
  py::list history;
  for (const auto& r : result.history) {
    py::dict e;
    e["epoch"] = r.epoch;
    e["loss"] = r.loss.total;
    e["lr"] = r.lr;
    e["valid"] = report_dict(r.valid);
    if (r.train) e["train"] = report_dict(*r.train);
    history.append(e);
  }
  py::dict out;
  out["best_epoch"] = result.best_epoch;
  out["best_valid_f1"] = result.best_valid_f1;
  out["history"] = history;
  return out;
}

template <typename T>
py::dict evaluate_impl(const ModelConfig& config, const fs::path& manifest, const fs::path& checkpoint,
                       const std::string& split) {
  const auto handle = DatasetHandle::open(manifest);
  const auto samples = handle.read_all(split);
  MultimodalModel<T> model(config, handle.manifest().shape());
  restore(Checkpoint::load(checkpoint), model);
  return report_dict(evaluate(model, std::span<const ModalityBundle>(samples), config.accuracy));
}

}  // namespace

PYBIND11_MODULE(_mmer, m) {
  m.doc() = "Multimodal multi-label emotion recognition core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);

  py::class_<ModelConfig>(m, "Config")
      .def(py::init<>())
      .def_static("from_text", &parse_config, py::arg("text"))
      .def_static("from_file", &load_config, py::arg("path"))
      .def("to_text", [](const ModelConfig& c) { return to_text(c); })
      .def("validate", &ModelConfig::validate)
      .def_readwrite("d_model", &ModelConfig::d_model)
      .def_readwrite("heads_label", &ModelConfig::heads_label)
      .def_readwrite("batch_size", &ModelConfig::batch_size)
      .def_readwrite("base_lr", &ModelConfig::base_lr)
      .def_readwrite("epochs", &ModelConfig::epochs)
      .def_readwrite("seed", &ModelConfig::seed)
      .def_readwrite("alpha", &ModelConfig::alpha)
      .def_readwrite("beta", &ModelConfig::beta)
      .def_readwrite("gamma", &ModelConfig::gamma)
      .def("__repr__", [](const ModelConfig& c) {
        return "<Config d_model=" + std::to_string(c.d_model) + " epochs=" + std::to_string(c.epochs) + ">";
      });

  m.def(
      "evaluate_predictions",
      [](py::array_t<int, py::array::c_style | py::array::forcecast> pred,
         py::array_t<int, py::array::c_style | py::array::forcecast> truth, bool subset) {
        return report_dict(evaluate_predictions(to_labels(pred), to_labels(truth),
                                                subset ? AccuracyMode::kSubset : AccuracyMode::kJaccard));
      },
      py::arg("pred"), py::arg("truth"), py::arg("subset_accuracy") = false,
      "Accuracy, precision, recall and micro-F1 of 0/1 matrices shaped [samples, labels].");

  m.def(
      "generate_synthetic",
      [](const fs::path& out_dir, std::uint64_t seed, bool aligned, std::array<std::size_t, 3> dims,
         std::array<std::size_t, 3> lengths, std::size_t n_train, std::size_t n_valid, std::size_t n_test,
         double noise) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.aligned = aligned;
        spec.dims = dims;
        spec.lengths = lengths;
        spec.n_train = n_train;
        spec.n_valid = n_valid;
        spec.n_test = n_test;
        spec.noise = noise;
        write_dataset(generate_synthetic(spec), out_dir);
        return out_dir / "manifest.json";
      },
      py::arg("out_dir"), py::arg("seed") = 0, py::arg("aligned") = true,
      py::arg("dims") = std::array<std::size_t, 3>{8, 8, 12},
      py::arg("lengths") = std::array<std::size_t, 3>{10, 10, 10}, py::arg("n_train") = 200,
      py::arg("n_valid") = 50, py::arg("n_test") = 50, py::arg("noise") = 1.0,
      "Writes a seeded synthetic dataset and returns its manifest path.");

  m.def(
      "load_split",
      [](const fs::path& manifest, const std::string& split) {
        py::list out;
        for (const auto& b : DatasetHandle::open(manifest).read_all(split)) {
          py::dict d;
          d["visual"] = matrix_array(b.features[0]);
          d["audio"] = matrix_array(b.features[1]);
          d["text"] = matrix_array(b.features[2]);
          d["labels"] = py::array_t<float>(b.labels.size(), b.labels.data());
          out.append(d);
        }
        return out;
      },
      py::arg("manifest"), py::arg("split"),
      "Records of one split as dicts of float32 arrays (features are [dim, steps]).");

  m.def(
      "train",
      [](const ModelConfig& config, const fs::path& manifest, const fs::path& out_dir,
         const std::string& precision, bool train_metrics) {
        if (precision == "f64") return train_impl<double>(config, manifest, out_dir, train_metrics);
        if (precision != "f32") throw ConfigError("precision: expected f32 or f64, got '" + precision + "'");
        return train_impl<float>(config, manifest, out_dir, train_metrics);
      },
      py::arg("config"), py::arg("manifest"), py::arg("out_dir") = fs::path(),
      py::arg("precision") = "f32", py::arg("train_metrics") = false);

  m.def(
      "evaluate_checkpoint",
      [](const ModelConfig& config, const fs::path& manifest, const fs::path& checkpoint,
         const std::string& split, const std::string& precision) {
        if (precision == "f64") return evaluate_impl<double>(config, manifest, checkpoint, split);
        return evaluate_impl<float>(config, manifest, checkpoint, split);
      },
      py::arg("config"), py::arg("manifest"), py::arg("checkpoint"), py::arg("split") = "test",
      py::arg("precision") = "f32");

  m.def(
      "grad_check",
      [](std::size_t max_per_tensor, std::uint64_t seed) {
        GradCheckOptions options;
        options.seed = seed;
        std::map<std::string, double> out;
        for (const auto& c : primitive_gradient_suite(options)) out[c.name] = c.report.max_rel_error();
        options.max_per_tensor = max_per_tensor;
        out["composite_loss"] = composite_gradient_check(options).max_rel_error();
        return out;
      },
      py::arg("max_per_tensor") = 0, py::arg("seed") = 0,
      "Maximum relative finite-difference error per primitive and for the composite loss.");

  m.def("lr_at", &lr_at, py::arg("step"), py::arg("total_steps"), py::arg("base_lr"),
        py::arg("warmup_fraction"));
}
