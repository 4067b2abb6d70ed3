#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "mcpred/corpus.hpp"
#include "mcpred/errors.hpp"
#include "mcpred/model.hpp"
#include "mcpred/nn/checkpoint.hpp"
#include "mcpred/random.hpp"
#include "mcpred/run_config.hpp"
#include "mcpred/scoring.hpp"
#include "mcpred/synthetic.hpp"
#include "mcpred/train.hpp"

namespace py = pybind11;
using namespace mcpred;

namespace {

RunConfig make_config(const py::dict& options) {
  RunConfig config;
  for (const auto& [key, value] : options) {
    const auto name = py::str(key).cast<std::string>();
    std::string text;
    if (py::isinstance<py::bool_>(value)) {
      text = value.cast<bool>() ? "true" : "false";
    } else {
      text = py::str(value).cast<std::string>();
    }
    apply_option(config, name, text);
  }
  config.model.validate();
  config.train.validate();
  return config;
}

std::vector<Sample> parse_lines(const std::vector<std::string>& lines) {
  std::vector<Sample> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) out.push_back(corpus::parse_sample(lines[i], i + 1));
  return out;
}

// A trained or loaded model with its vocabulary.
struct Predictor {
  model::Model model;
  Vocabulary vocab;
  train::TrainResult result;
  text::MaskSet mask;

  std::vector<model::EncodedSample> encode(const std::vector<std::string>& lines) const {
    return model::encode_corpus(parse_lines(lines), vocab, model.config(), mask);
  }

  double accuracy(const std::vector<std::string>& lines) const {
    return train::evaluate_accuracy(model, encode(lines));
  }

  py::list predict(const std::vector<std::string>& lines) const {
    const auto samples = parse_lines(lines);
    py::list out;
    for (const auto& s : samples) {
      const auto b = model::score_sample(model, model::encode_sample(s, vocab, model.config(), mask));
      py::dict row;
      row["sample"] = s.id;
      row["prediction"] = b.prediction;
      row["pr"] = b.pr;
      out.append(row);
    }
    return out;
  }

  std::string explain(const std::string& line) const {
    const Sample s = corpus::parse_sample(line, 1);
    const auto b = model::score_sample(model, model::encode_sample(s, vocab, model.config(), mask));
    return scoring::breakdown_json_lines(s.id, b, s.answer);
  }

  void save(const std::string& path) const { nn::save_checkpoint_file(path, model::make_checkpoint(model, vocab)); }

  py::list metrics() const {
    py::list out;
    for (const auto& row : result.metrics) {
      out.append(py::make_tuple(row.step, row.epoch, row.train_loss,
                                row.dev_accuracy ? py::cast(*row.dev_accuracy) : py::none()));
    }
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-chain script event prediction";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("option_names", [] {
    std::vector<std::string> names;
    for (const auto& def : option_defs()) names.push_back(def.name);
    return names;
  });

  m.def(
      "synthesize",
      [](py::dict options) {
        const RunConfig config = make_config(options);
        std::vector<std::string> lines;
        for (const auto& s : corpus::generate_synthetic(config.synth, derive_seed(config.train.seed, "synthetic"))) {
          lines.push_back(corpus::serialize_sample(s));
        }
        return lines;
      },
      py::arg("options"));

  py::class_<Predictor>(m, "Predictor")
      .def("accuracy", &Predictor::accuracy, py::arg("lines"))
      .def("predict", &Predictor::predict, py::arg("lines"))
      .def("explain", &Predictor::explain, py::arg("line"))
      .def("save", &Predictor::save, py::arg("path"))
      .def_property_readonly("metrics", &Predictor::metrics)
      .def_property_readonly("best_dev_accuracy", [](const Predictor& p) { return p.result.best_dev_accuracy; })
      .def_property_readonly("vocab_size", [](const Predictor& p) { return p.vocab.size(); })
      .def_property_readonly("parameter_count", [](const Predictor& p) { return p.model.params().scalar_count(); });

  m.def(
      "train",
      [](const std::vector<std::string>& train_lines, std::optional<std::vector<std::string>> dev_lines,
         py::dict options) {
        const RunConfig config = make_config(options);
        const auto train_samples = parse_lines(train_lines);
        std::optional<std::vector<Sample>> dev_samples;
        if (dev_lines) dev_samples = parse_lines(*dev_lines);
        py::gil_scoped_release release;
        auto trained = train::train(train_samples, dev_samples ? &*dev_samples : nullptr, config.model, config.train,
                                    {}, config.min_count);
        return Predictor{std::move(trained.model), std::move(trained.vocab), std::move(trained.result), config.mask};
      },
      py::arg("train_lines"), py::arg("dev_lines") = py::none(), py::arg("options"));

  m.def(
      "load",
      [](const std::string& path) {
        auto loaded = model::model_from_checkpoint(nn::load_checkpoint_file(path));
        return Predictor{std::move(loaded.model), std::move(loaded.vocab), {}, {}};
      },
      py::arg("path"));

  m.def(
      "gradcheck",
      [](const std::vector<std::string>& lines, py::dict options) {
        const RunConfig config = make_config(options);
        const auto samples = parse_lines(lines);
        const Vocabulary vocab = build_vocabulary(samples, config.min_count);
        model::Model model(config.model, vocab.size(), derive_seed(config.train.seed, "init"));
        const auto encoded = model::encode_corpus(samples, vocab, config.model);
        return train::check_gradients(model, encoded, config.train.lambda).max_relative_error;
      },
      py::arg("lines"), py::arg("options"));
}
