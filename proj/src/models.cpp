#include "namegate/models.hpp"

#include <fstream>

#include "namegate/dataio.hpp"
#include "namegate/ops.hpp"

namespace namegate {
namespace {

constexpr int kCheckpointFormat = 1;

class TensorWriter {
 public:
  explicit TensorWriter(const std::filesystem::path& sidecar)
      : dir_(sidecar.parent_path()), stem_(sidecar.stem().string()) {}

  void put(nlohmann::ordered_json& table, const std::string& name, const Matrix& m) {
    const std::string file = stem_ + "." + name + ".emb";
    write_embedding_file(dir_ / file, m);
    table[name] = file;
  }

 private:
  std::filesystem::path dir_;
  std::string stem_;
};

Matrix get_tensor(const nlohmann::json& doc, const std::filesystem::path& dir, const std::string& name) {
  if (!doc.contains("tensors") || !doc["tensors"].contains(name)) {
    throw LoadError("checkpoint is missing tensor '" + name + "'");
  }
  return read_embedding_file(dir / doc["tensors"][name].get<std::string>());
}

void write_sidecar(const std::filesystem::path& sidecar, const nlohmann::ordered_json& doc) {
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + sidecar.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("short write to " + sidecar.string());
}

Param<float> as_param(std::string name, Matrix m) { return Param<float>(std::move(name), std::move(m)); }

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Matcher: return "matcher";
    case ModelKind::Classifier: return "classifier";
    case ModelKind::Ctc: return "ctc";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "matcher") return ModelKind::Matcher;
  if (name == "classifier") return ModelKind::Classifier;
  if (name == "ctc") return ModelKind::Ctc;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

ModelOptions ModelOptions::defaults_for(ModelKind kind) {
  ModelOptions o;
  o.kind = kind;
  if (kind == ModelKind::Ctc) o.optimizer = OptimizerKind::AdamW;
  return o;
}

Matrix class_prompt_matrix(const LabelSpace& labels, const PromptTemplate& templates,
                           const TextEmbeddingProvider& provider) {
  Matrix out(labels.class_count(), provider.dim());
  for (std::size_t k = 0; k < labels.class_count(); ++k) {
    const auto v = provider.embed(render_prompt(labels.label_at(k), templates));
    std::copy(v.data().begin(), v.data().end(), out.row(k).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------

MatcherRecognizer::MatcherRecognizer(MatcherParams<float> params, LabelSpace labels,
                                     PromptTemplate templates, Matrix candidate_text,
                                     nlohmann::json provider)
    : params_(std::move(params)),
      labels_(std::move(labels)),
      templates_(std::move(templates)),
      candidate_text_(std::move(candidate_text)),
      provider_(std::move(provider)) {
  if (candidate_text_.rows() != labels_.class_count() || candidate_text_.cols() != params_.text_dim()) {
    throw ShapeError("matcher: candidate prompt matrix " + candidate_text_.shape_string() +
                     " does not fit " + std::to_string(labels_.class_count()) + " classes of dim " +
                     std::to_string(params_.text_dim()));
  }
  const auto projected = embed_text(params_, candidate_text_);
  for (std::size_t k = 0; k < labels_.class_count(); ++k) {
    const auto r = projected.row(k);
    candidates_.push_back({labels_.label_at(k), Matrix(1, r.size(), std::vector<float>(r.begin(), r.end()))});
  }
}

Prediction MatcherRecognizer::explain(const RecordingFeatures& rec, std::string_view) const {
  const auto audio = embed_audio(params_, rec.pooled);
  const auto scored = score_candidates(audio, candidates_);
  Prediction out;
  out.label = scored.predicted;
  for (std::size_t k = 0; k < candidates_.size(); ++k) {
    out.scores.emplace_back(candidates_[k].label.name(), scored.scores[k]);
  }
  return out;
}

void MatcherRecognizer::save(const std::filesystem::path& sidecar) const {
  TensorWriter w(sidecar);
  nlohmann::ordered_json doc;
  doc["format"] = kCheckpointFormat;
  doc["kind"] = "matcher";
  nlohmann::ordered_json tensors;
  w.put(tensors, "W_a", params_.audio_weight.value);
  w.put(tensors, "b_a", params_.audio_bias.value);
  w.put(tensors, "W_t", params_.text_weight.value);
  w.put(tensors, "b_t", params_.text_bias.value);
  w.put(tensors, "candidate_text", candidate_text_);
  doc["tensors"] = tensors;
  doc["s_a"] = params_.audio_log_scale.value[0];
  doc["s_t"] = params_.text_log_scale.value[0];
  doc["dims"] = {{"audio", params_.audio_dim()}, {"text", params_.text_dim()}, {"shared", params_.shared_dim()}};
  doc["templates"] = {{"positive", templates_.positive_template}, {"negative", templates_.negative_text}};
  doc["vocabulary"] = labels_.vocabulary();
  doc["provider"] = provider_;
  write_sidecar(sidecar, doc);
}

// ---------------------------------------------------------------------------

ClassifierRecognizer::ClassifierRecognizer(MlpParams<float> params, LabelSpace labels)
    : params_(std::move(params)), labels_(std::move(labels)) {
  if (params_.class_count() != labels_.class_count()) {
    throw ShapeError("classifier: model has " + std::to_string(params_.class_count()) +
                     " outputs for " + std::to_string(labels_.class_count()) + " classes");
  }
}

Prediction ClassifierRecognizer::explain(const RecordingFeatures& rec, std::string_view) const {
  const auto logits = mlp_forward_eval(params_, rec.pooled);
  Prediction out;
  out.label = label_from_logits(logits.row(0), labels_);
  for (std::size_t k = 0; k < logits.cols(); ++k) {
    out.scores.emplace_back(labels_.label_at(k).name(), logits(0, k));
  }
  return out;
}

void ClassifierRecognizer::save(const std::filesystem::path& sidecar) const {
  TensorWriter w(sidecar);
  nlohmann::ordered_json doc;
  doc["format"] = kCheckpointFormat;
  doc["kind"] = "classifier";
  nlohmann::ordered_json tensors;
  w.put(tensors, "W1", params_.hidden_weight.value);
  w.put(tensors, "b1", params_.hidden_bias.value);
  w.put(tensors, "gamma", params_.gamma.value);
  w.put(tensors, "beta", params_.beta.value);
  w.put(tensors, "W2", params_.output_weight.value);
  w.put(tensors, "b2", params_.output_bias.value);
  w.put(tensors, "running_mean", params_.running_mean);
  w.put(tensors, "running_var", params_.running_var);
  doc["tensors"] = tensors;
  doc["batchnorm"] = {{"momentum", params_.momentum}, {"eps", params_.eps}};
  doc["vocabulary"] = labels_.vocabulary();
  write_sidecar(sidecar, doc);
}

// ---------------------------------------------------------------------------

CtcRecognizer::CtcRecognizer(CtcParams<float> params, Alphabet alphabet, AsrDecisionOptions options)
    : params_(std::move(params)), alphabet_(std::move(alphabet)), options_(options) {
  if (params_.symbol_count() != alphabet_.size()) {
    throw ShapeError("ctc: projection has " + std::to_string(params_.symbol_count()) +
                     " outputs for an alphabet of " + std::to_string(alphabet_.size()));
  }
}

Prediction CtcRecognizer::explain(const RecordingFeatures& rec, std::string_view target_word) const {
  if (rec.frames == nullptr) throw StateError("ctc recognizer needs frame-level features");
  Prediction out;
  out.transcription = transcribe(params_, alphabet_, *rec.frames);
  out.label = asr_decide(*out.transcription, target_word, options_);
  return out;
}

void CtcRecognizer::save(const std::filesystem::path& sidecar) const {
  TensorWriter w(sidecar);
  nlohmann::ordered_json doc;
  doc["format"] = kCheckpointFormat;
  doc["kind"] = "ctc";
  nlohmann::ordered_json tensors;
  w.put(tensors, "W", params_.weight.value);
  w.put(tensors, "b", params_.bias.value);
  doc["tensors"] = tensors;
  doc["keep_accents"] = alphabet_.keeps_accents();
  doc["raw_substring"] = options_.raw_substring;
  write_sidecar(sidecar, doc);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Recognizer> load_recognizer(const std::filesystem::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) throw IoError("cannot open checkpoint " + sidecar.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw LoadError(sidecar.string() + ": " + ex.what());
  }
  const auto dir = sidecar.parent_path();
  try {
    if (doc.value("format", 0) != kCheckpointFormat) {
      throw LoadError(sidecar.string() + ": unsupported checkpoint format");
    }
    const auto kind = parse_model_kind(doc.at("kind").get<std::string>());
    switch (kind) {
      case ModelKind::Matcher: {
        MatcherParams<float> p;
        p.audio_weight = as_param("W_a", get_tensor(doc, dir, "W_a"));
        p.audio_bias = as_param("b_a", get_tensor(doc, dir, "b_a"));
        p.text_weight = as_param("W_t", get_tensor(doc, dir, "W_t"));
        p.text_bias = as_param("b_t", get_tensor(doc, dir, "b_t"));
        p.audio_log_scale = as_param("s_a", Matrix::scalar(doc.at("s_a").get<float>()));
        p.text_log_scale = as_param("s_t", Matrix::scalar(doc.at("s_t").get<float>()));
        PromptTemplate t{doc.at("templates").at("positive").get<std::string>(),
                         doc.at("templates").at("negative").get<std::string>()};
        return std::make_unique<MatcherRecognizer>(
            std::move(p), LabelSpace(doc.at("vocabulary").get<std::vector<std::string>>()), t,
            get_tensor(doc, dir, "candidate_text"), doc.value("provider", nlohmann::json::object()));
      }
      case ModelKind::Classifier: {
        MlpParams<float> p;
        p.hidden_weight = as_param("W1", get_tensor(doc, dir, "W1"));
        p.hidden_bias = as_param("b1", get_tensor(doc, dir, "b1"));
        p.gamma = as_param("gamma", get_tensor(doc, dir, "gamma"));
        p.beta = as_param("beta", get_tensor(doc, dir, "beta"));
        p.output_weight = as_param("W2", get_tensor(doc, dir, "W2"));
        p.output_bias = as_param("b2", get_tensor(doc, dir, "b2"));
        p.running_mean = get_tensor(doc, dir, "running_mean");
        p.running_var = get_tensor(doc, dir, "running_var");
        p.momentum = doc.at("batchnorm").at("momentum").get<double>();
        p.eps = doc.at("batchnorm").at("eps").get<double>();
        return std::make_unique<ClassifierRecognizer>(
            std::move(p), LabelSpace(doc.at("vocabulary").get<std::vector<std::string>>()));
      }
      case ModelKind::Ctc: {
        CtcParams<float> p;
        p.weight = as_param("W_ctc", get_tensor(doc, dir, "W"));
        p.bias = as_param("b_ctc", get_tensor(doc, dir, "b"));
        const bool accents = doc.value("keep_accents", false);
        AsrDecisionOptions opts{doc.value("raw_substring", false), accents};
        return std::make_unique<CtcRecognizer>(std::move(p),
                                               accents ? Alphabet::accented() : Alphabet::folded(), opts);
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw LoadError(sidecar.string() + ": " + ex.what());
  }
  throw LoadError(sidecar.string() + ": unreachable checkpoint kind");
}

}  // namespace namegate
