// Python bindings for the namegate core.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "namegate/config.hpp"
#include "namegate/ctc.hpp"
#include "namegate/dataio.hpp"
#include "namegate/errors.hpp"
#include "namegate/evaluation.hpp"
#include "namegate/gradsuite.hpp"
#include "namegate/matcher.hpp"
#include "namegate/metrics.hpp"
#include "namegate/models.hpp"
#include "namegate/synthdata.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace namegate;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <typename T, typename A>
BasicMatrix<T> to_matrix(const A& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array, got " + std::to_string(a.ndim()) + " dimensions");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return BasicMatrix<T>(rows, cols, std::vector<T>(a.data(), a.data() + rows * cols));
}

template <typename T>
py::array_t<T> to_array(const BasicMatrix<T>& m) {
  py::array_t<T> out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

// JSON crosses the boundary as text; the Python layer decodes it.
template <typename J>
std::string dump(const J& j) {
  return j.dump();
}

py::dict entry_dict(const ManifestEntry& e) {
  py::dict d;
  d["recording_id"] = e.recording_id;
  d["speaker_id"] = e.speaker_id;
  d["target_word"] = e.target_word;
  d["correct"] = e.correct;
  d["embedding_path"] = e.embedding_path;
  d["frames"] = e.frames;
  d["dim"] = e.dim;
  return d;
}

struct PyRecognizer {
  std::unique_ptr<Recognizer> model;

  py::dict explain(const F32Array& frames, const std::string& target) const {
    const Matrix m = to_matrix<float>(frames);
    RecordingFeatures rec{pool_mean(m), &m};
    const auto p = model->explain(rec, target);
    py::dict out;
    out["predicted"] = p.label.name();
    out["correct"] = p.label == PromptLabel::word(target);
    py::dict scores;
    for (const auto& [name, s] : p.scores) scores[py::str(name)] = s;
    out["scores"] = scores;
    if (p.transcription) out["transcription"] = *p.transcription;
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_namegate, m) {
  m.doc() = "namegate core bindings";

  auto base = py::register_exception<Error>(m, "NamegateError");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<LoadError>(m, "LoadError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());

  m.def("read_embedding", [](const fs::path& p) { return to_array(read_embedding_file(p)); },
        "Read an EMB1 file into a float32 array.", py::arg("path"));
  m.def("write_embedding", [](const fs::path& p, const F32Array& a) { write_embedding_file(p, to_matrix<float>(a)); },
        "Write a 2-d float32 array as an EMB1 file.", py::arg("path"), py::arg("array"));
  m.def("load_manifest", [](const fs::path& p) {
        const auto d = load_dataset(p);
        py::list out;
        for (const auto& e : d.entries) out.append(entry_dict(e));
        return out;
      },
      "Validate a dataset manifest and return its entries.", py::arg("path"));

  m.def("_generate_synthetic", [](const std::string& spec, const fs::path& out) {
        const auto result = generate(parse_synth_spec(nlohmann::json::parse(spec)), out);
        return result.manifest;
      },
      py::arg("spec_json"), py::arg("out_dir"));

  m.def("_crossval", [](const fs::path& config, const std::string& model, std::size_t jobs,
                        std::optional<fs::path> out) {
        std::optional<ModelKind> kind;
        if (!model.empty()) kind = parse_model_kind(model);
        const auto c = load_run_config(config, kind);
        CvSummary s;
        {
          py::gil_scoped_release release;
          s = crossval(c, jobs);
        }
        if (out) write_crossval(s, c, *out, nlohmann::ordered_json::object());
        return dump(to_json(s));
      },
      py::arg("config"), py::arg("model") = "", py::arg("jobs") = 1, py::arg("out_dir") = std::nullopt);

  m.def("_gradcheck", [](const std::vector<std::uint64_t>& seeds) { return dump(to_json(run_gradient_suite(seeds))); },
        py::arg("seeds"));

  m.def("contrastive_loss", [](const F64Array& a2t, const F64Array& t2a) {
        return contrastive_loss(to_matrix<double>(a2t), to_matrix<double>(t2a));
      },
      "Symmetric cross-entropy over audio-to-text and text-to-audio logits.", py::arg("audio_to_text"),
      py::arg("text_to_audio"));
  m.def("ctc_loss", [](const F64Array& logprobs, const std::vector<int>& target) {
        return ctc_loss(to_matrix<double>(logprobs), std::span<const int>(target));
      },
      "CTC negative log-likelihood of a target under TxV log-probabilities.", py::arg("logprobs"),
      py::arg("target"));

  m.def("_metrics", [](const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                       std::size_t classes) {
        if (truth.size() != predicted.size()) throw ShapeError("truth and predicted lengths differ");
        ConfusionMatrix cm(classes);
        for (std::size_t i = 0; i < truth.size(); ++i) {
          if (truth[i] >= classes || predicted[i] >= classes) throw IndexError("class index out of range");
          cm.add(truth[i], predicted[i]);
        }
        std::vector<std::string> names;
        for (std::size_t k = 0; k < classes; ++k) names.push_back(std::to_string(k));
        return dump(to_json(compute_metrics(cm), names));
      },
      py::arg("truth"), py::arg("predicted"), py::arg("classes"));

  py::class_<PyRecognizer>(m, "Recognizer")
      .def_property_readonly("kind", [](const PyRecognizer& r) { return to_string(r.model->kind()); })
      .def("explain", &PyRecognizer::explain, "Decision and per-class scores for one TxD frame matrix.",
           py::arg("frames"), py::arg("target"))
      .def("predict", [](const PyRecognizer& r, const F32Array& frames, const std::string& target) {
            return r.explain(frames, target)["predicted"];
          },
          py::arg("frames"), py::arg("target"));
  m.def("load_recognizer", [](const fs::path& p) { return PyRecognizer{load_recognizer(p)}; },
        "Load a checkpoint sidecar written by crossval.", py::arg("path"));
}
