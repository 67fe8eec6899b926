// Python surface of the C++ core: model construction and scoring, dataset
// synthesis and file round trips, training, and the complexity accounting.
// Sample blocks cross the boundary as numpy arrays shaped [N, 2, K] with
// row 0 = I and row 1 = Q; per-frame labels and SNR tags ride alongside as
// integer sequences.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <string>
#include <vector>

#include "ulcnn/analysis.hpp"
#include "ulcnn/dataio.hpp"
#include "ulcnn/error.hpp"
#include "ulcnn/model.hpp"
#include "ulcnn/training.hpp"

namespace py = pybind11;
using namespace ulcnn;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

RealTensor tensor_from_array(const DoubleArray& arr) {
  std::vector<int> shape(static_cast<size_t>(arr.ndim()));
  for (py::ssize_t d = 0; d < arr.ndim(); ++d) {
    shape[static_cast<size_t>(d)] = static_cast<int>(arr.shape(d));
  }
  RealTensor t(std::move(shape));
  std::memcpy(t.data(), arr.data(), sizeof(double) * static_cast<size_t>(t.size()));
  return t;
}

py::array_t<double> array_from_tensor(const RealTensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> arr(shape);
  std::memcpy(arr.mutable_data(), t.data(), sizeof(double) * static_cast<size_t>(t.size()));
  return arr;
}

/// [N, 2, K] samples plus per-frame tags -> frame records. Empty tag lists
/// mean all zero. Samples land on the float32 grid, matching file storage.
std::vector<Frame> frames_from_arrays(const DoubleArray& x, const std::vector<int>& labels,
                                      const std::vector<int>& snrs) {
  if (x.ndim() != 3 || x.shape(1) != 2) fail_config("frames: expected samples shaped [N, 2, K]");
  const size_t n = static_cast<size_t>(x.shape(0));
  const int k = static_cast<int>(x.shape(2));
  if (!labels.empty() && labels.size() != n) fail_config("frames: one label per frame required");
  if (!snrs.empty() && snrs.size() != n) fail_config("frames: one snr per frame required");

  auto view = x.unchecked<3>();
  std::vector<Frame> frames(n);
  for (size_t f = 0; f < n; ++f) {
    Frame& fr = frames[f];
    fr.i.resize(static_cast<size_t>(k));
    fr.q.resize(static_cast<size_t>(k));
    for (int t = 0; t < k; ++t) {
      fr.i[static_cast<size_t>(t)] = static_cast<float>(view(static_cast<py::ssize_t>(f), 0, t));
      fr.q[static_cast<size_t>(t)] = static_cast<float>(view(static_cast<py::ssize_t>(f), 1, t));
    }
    if (!labels.empty()) {
      const int label = labels[f];
      if (label < 0 || label > 255) fail_config("frames: label out of range [0, 255]");
      fr.label = static_cast<uint8_t>(label);
    }
    if (!snrs.empty()) fr.snr_db = static_cast<int16_t>(snrs[f]);
  }
  return frames;
}

py::tuple arrays_from_frames(const std::vector<Frame>& frames) {
  const py::ssize_t n = static_cast<py::ssize_t>(frames.size());
  const py::ssize_t k = n > 0 ? frames.front().k() : 0;
  py::array_t<float> x({n, static_cast<py::ssize_t>(2), k});
  auto view = x.mutable_unchecked<3>();
  std::vector<int> labels(frames.size()), snrs(frames.size());
  for (py::ssize_t f = 0; f < n; ++f) {
    const Frame& fr = frames[static_cast<size_t>(f)];
    for (py::ssize_t t = 0; t < k; ++t) {
      view(f, 0, t) = fr.i[static_cast<size_t>(t)];
      view(f, 1, t) = fr.q[static_cast<size_t>(t)];
    }
    labels[static_cast<size_t>(f)] = fr.label;
    snrs[static_cast<size_t>(f)] = fr.snr_db;
  }
  return py::make_tuple(std::move(x), std::move(labels), std::move(snrs));
}

Modulation modulation_from_name(const std::string& raw) {
  std::string upper = raw;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  const auto mod = parse_modulation(upper);
  if (!mod) fail_config("unsupported modulation: " + raw);
  return *mod;
}

void check_labels_fit(const std::vector<int>& labels, int n_classes, const char* what) {
  for (int label : labels) {
    if (label < 0 || label >= n_classes) {
      fail_config(std::string(what) + ": label " + std::to_string(label) +
                  " outside the model's " + std::to_string(n_classes) + " classes");
    }
  }
}

py::dict report_to_dict(const MetricsReport& report) {
  py::dict out;
  out["best_epoch"] = report.best_epoch;
  py::list history;
  for (const EpochRow& row : report.history) {
    py::dict h;
    h["epoch"] = row.epoch;
    h["lr"] = row.lr;
    h["train_loss"] = row.train_loss;
    h["val_loss"] = row.val_loss;
    h["val_acc"] = row.val_acc;
    history.append(std::move(h));
  }
  out["history"] = std::move(history);
  return out;
}

}  // namespace

PYBIND11_MODULE(_ulcnn, m) {
  m.doc() = "Complex-front-end modulation classifier core";
  m.attr("__version__") = "0.1.0";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::Config:
        case ErrorKind::Data:
          PyErr_SetString(PyExc_ValueError, e.what());
          break;
        case ErrorKind::Numeric:
          PyErr_SetString(PyExc_FloatingPointError, e.what());
          break;
        case ErrorKind::Io:
          PyErr_SetString(PyExc_OSError, e.what());
          break;
      }
    }
  });

  py::class_<ModelConfig>(m, "ModelConfig", "Architecture shape and component toggles")
      .def(py::init<>())
      .def_readwrite("k", &ModelConfig::k)
      .def_readwrite("n_cv", &ModelConfig::n_cv)
      .def_readwrite("n_pw", &ModelConfig::n_pw)
      .def_readwrite("s_ke", &ModelConfig::s_ke)
      .def_readwrite("n_fmdr", &ModelConfig::n_fmdr)
      .def_readwrite("n_classes", &ModelConfig::n_classes)
      .def_readwrite("shuffle_groups", &ModelConfig::shuffle_groups)
      .def_readwrite("ca_reduction", &ModelConfig::ca_reduction)
      .def_readwrite("use_cv_conv", &ModelConfig::use_cv_conv)
      .def_readwrite("use_ca", &ModelConfig::use_ca)
      .def_readwrite("use_cs", &ModelConfig::use_cs)
      .def_readwrite("use_clff", &ModelConfig::use_clff)
      .def("validate", &ModelConfig::validate)
      .def("fusion_taps", &ModelConfig::fusion_taps)
      .def("__eq__", [](const ModelConfig& a, const ModelConfig& b) { return a == b; });

  py::class_<Model>(m, "Model", "Classifier with seeded initialization")
      .def(py::init<const ModelConfig&, uint64_t>(), py::arg("config") = ModelConfig{},
           py::arg("seed") = 0)
      .def_property_readonly("config", &Model::config, py::return_value_policy::copy)
      .def(
          "score",
          [](Model& self, const DoubleArray& x) {
            RealTensor input = tensor_from_array(x);
            RealTensor probs;
            {
              py::gil_scoped_release release;
              probs = self.score(input);
            }
            return array_from_tensor(probs);
          },
          py::arg("x"), "Class probabilities for samples shaped [B, 2, K]")
      .def(
          "predict",
          [](Model& self, const DoubleArray& x) {
            RealTensor input = tensor_from_array(x);
            std::vector<int> out;
            {
              py::gil_scoped_release release;
              out = self.predict(input);
            }
            return out;
          },
          py::arg("x"), "Most likely class index per frame")
      .def("param_count_total", &Model::param_count_total)
      .def("param_count_trainable", &Model::param_count_trainable)
      .def("param_count_moving", &Model::param_count_moving)
      .def(
          "save",
          [](Model& self, const std::string& path) { save_weights(self, path); },
          py::arg("path"), "Snaps storage to the float32 grid and writes the weight file")
      .def_static(
          "load", [](const std::string& path) { return load_model(path); }, py::arg("path"));

  m.def(
      "generate",
      [](const std::string& modulation, int snr_db, int frames, int k, int sps, uint64_t seed,
         bool noiseless, double phase_offset, double cfo, int label) {
        GenSpec spec;
        spec.modulation = modulation_from_name(modulation);
        spec.snr_db = snr_db;
        spec.frames = frames;
        spec.k = k;
        spec.samples_per_symbol = sps;
        spec.seed = seed;
        spec.noiseless = noiseless;
        spec.phase_offset_rad = phase_offset;
        spec.cfo_cycles_per_sample = cfo;
        if (label < 0 || label > 255) fail_config("generate: label out of range [0, 255]");
        spec.label = static_cast<uint8_t>(label);
        return arrays_from_frames(generate(spec));
      },
      py::arg("modulation"), py::arg("snr_db") = 10, py::arg("frames") = 1, py::arg("k") = 128,
      py::arg("sps") = 8, py::arg("seed") = 0, py::arg("noiseless") = false,
      py::arg("phase_offset") = 0.0, py::arg("cfo") = 0.0, py::arg("label") = 0,
      "Synthesize frames; returns (samples [N, 2, K], labels, snrs)");

  m.def(
      "rotate_augment",
      [](const DoubleArray& x, const std::vector<int>& labels, const std::vector<int>& snrs) {
        return arrays_from_frames(rotate_augment(frames_from_arrays(x, labels, snrs)));
      },
      py::arg("x"), py::arg("labels") = std::vector<int>{}, py::arg("snrs") = std::vector<int>{},
      "Quarter-turn expansion: every frame yields rotations by 0, 90, 180, 270 degrees");

  m.def(
      "write_iqf",
      [](const std::string& path, const DoubleArray& x, const std::vector<int>& labels,
         const std::vector<int>& snrs, const std::vector<std::string>& label_names) {
        LabelMap map;
        map.names = label_names;
        write_iqf(frames_from_arrays(x, labels, snrs), map, path);
      },
      py::arg("path"), py::arg("x"), py::arg("labels"), py::arg("snrs"), py::arg("label_names"),
      "Write a checksummed dataset file");

  m.def(
      "read_iqf",
      [](const std::string& path) {
        auto [frames, map] = read_iqf(path);
        py::tuple parts = arrays_from_frames(frames);
        return py::make_tuple(parts[0], parts[1], parts[2], map.names);
      },
      py::arg("path"), "Read a dataset file; returns (samples, labels, snrs, label_names)");

  m.def(
      "split",
      [](const DoubleArray& x, const std::vector<int>& labels, const std::vector<int>& snrs,
         double train, double val, double test, uint64_t seed) {
        SplitResult parts =
            split(frames_from_arrays(x, labels, snrs), {train, val, test}, seed);
        py::dict out;
        out["train"] = arrays_from_frames(parts.train);
        out["val"] = arrays_from_frames(parts.val);
        out["test"] = arrays_from_frames(parts.test);
        return out;
      },
      py::arg("x"), py::arg("labels"), py::arg("snrs"), py::arg("train") = 0.6,
      py::arg("val") = 0.2, py::arg("test") = 0.2, py::arg("seed") = 0,
      "Stratified per-(label, snr) split; returns dict of (samples, labels, snrs) triples");

  m.def(
      "fit",
      [](Model& model, const DoubleArray& train_x, const std::vector<int>& train_labels,
         const std::vector<int>& train_snrs, const DoubleArray& val_x,
         const std::vector<int>& val_labels, const std::vector<int>& val_snrs, double lr,
         int epochs, int batch_size, uint64_t seed, bool use_da, bool use_alr) {
        const int n_classes = model.config().n_classes;
        check_labels_fit(train_labels, n_classes, "fit");
        check_labels_fit(val_labels, n_classes, "fit");
        std::vector<Frame> train = frames_from_arrays(train_x, train_labels, train_snrs);
        std::vector<Frame> val = frames_from_arrays(val_x, val_labels, val_snrs);
        TrainConfig tc;
        tc.initial_lr = lr;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.seed = seed;
        tc.use_da = use_da;
        tc.use_alr = use_alr;
        MetricsReport report;
        {
          py::gil_scoped_release release;
          report = fit(model, train, val, tc);
        }
        return report_to_dict(report);
      },
      py::arg("model"), py::arg("train_x"), py::arg("train_labels"), py::arg("train_snrs"),
      py::arg("val_x"), py::arg("val_labels"), py::arg("val_snrs"), py::arg("lr") = 0.001,
      py::arg("epochs") = 200, py::arg("batch_size") = 128, py::arg("seed") = 0,
      py::arg("use_da") = true, py::arg("use_alr") = true,
      "Train in place with best-validation-loss checkpointing; returns the epoch history");

  m.def(
      "evaluate",
      [](Model& model, const DoubleArray& x, const std::vector<int>& labels,
         const std::vector<int>& snrs) {
        check_labels_fit(labels, model.config().n_classes, "evaluate");
        std::vector<Frame> frames = frames_from_arrays(x, labels, snrs);
        MetricsReport report;
        {
          py::gil_scoped_release release;
          report = evaluate(model, frames);
        }
        py::dict out;
        out["overall_accuracy"] = report.overall_accuracy;
        out["average_accuracy"] = report.average_accuracy;
        out["per_snr"] = report.per_snr;
        const py::ssize_t n = report.n_classes;
        py::array_t<int64_t> confusion({n, n});
        std::memcpy(confusion.mutable_data(), report.confusion.data(),
                    sizeof(int64_t) * report.confusion.size());
        out["confusion"] = std::move(confusion);
        return out;
      },
      py::arg("model"), py::arg("x"), py::arg("labels"), py::arg("snrs"),
      "Accuracy overall, per SNR, and as a confusion matrix (rows = truth)");

  m.def(
      "model_complexity",
      [](const ModelConfig& config) {
        ComplexityReport report = model_complexity(config);
        py::list rows;
        for (const ComplexityRow& row : report.rows) {
          py::dict r;
          r["name"] = row.name;
          r["params_trainable"] = row.params_trainable;
          r["params_moving"] = row.params_moving;
          r["macc"] = row.macc;
          rows.append(std::move(r));
        }
        py::dict out;
        out["rows"] = std::move(rows);
        out["total_params"] = report.total_params();
        out["total_trainable"] = report.total_trainable();
        out["total_moving"] = report.total_moving();
        out["total_macc"] = report.total_macc();
        return out;
      },
      py::arg("config") = ModelConfig{},
      "Analytic per-layer parameter and multiply-accumulate accounting");

  m.def("macc_cv", &macc_cv, py::arg("k"), py::arg("n_cv"), py::arg("s_ke"), py::arg("c_in"),
        "Multiply-accumulates of the complex front-end convolution");
  m.def("macc_sep", &macc_sep, py::arg("n_len"), py::arg("c"), py::arg("n_pw"), py::arg("s_ke"),
        "Multiply-accumulates of one stride-2 separable convolution");
  m.def("macc_standard_conv", &macc_standard_conv, py::arg("n_len"), py::arg("c"),
        py::arg("n_pw"), py::arg("s_ke"),
        "Multiply-accumulates of the same-shape standard convolution");
}
