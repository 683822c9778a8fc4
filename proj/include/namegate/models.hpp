#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "namegate/baselines.hpp"
#include "namegate/matcher.hpp"
#include "namegate/optim.hpp"
#include "namegate/prompts.hpp"

namespace namegate {

enum class ModelKind { Matcher, Classifier, Ctc };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

// The "model" section of a run configuration.
struct ModelOptions {
  ModelKind kind = ModelKind::Matcher;
  std::size_t shared_dim = kDefaultSharedDim;
  std::size_t hidden_dim = kDefaultMlpHidden;
  PromptTemplate templates;
  // Matcher: keep only the first row of each label within a batch.
  bool drop_duplicate_labels = false;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamHyper hyper;  // lr is overwritten per grid entry
  // AdamW: when false, 1x1 params (the logit scales) are not decayed.
  bool decay_scalars = true;
  double batchnorm_momentum = 0.1;
  double batchnorm_eps = 1e-5;
  bool keep_accents = false;
  bool raw_substring = false;

  static ModelOptions defaults_for(ModelKind kind);
};

// Inputs of one recording as a recognizer sees them.
struct RecordingFeatures {
  Matrix pooled;                  // 1 x D, mean over frames
  const Matrix* frames = nullptr;  // T x D, required by the CTC path
};

struct Prediction {
  PromptLabel label = PromptLabel::mispronounced();
  std::vector<std::pair<std::string, double>> scores;  // per candidate class
  std::optional<std::string> transcription;            // CTC path only
};

// A trained model behind its decision rule.
class Recognizer {
 public:
  virtual ~Recognizer() = default;
  virtual ModelKind kind() const = 0;
  virtual Prediction explain(const RecordingFeatures& rec, std::string_view target_word) const = 0;
  PromptLabel predict(const RecordingFeatures& rec, std::string_view target_word) const {
    return explain(rec, target_word).label;
  }
  // Writes `sidecar` (JSON) plus sibling EMB1 tensor files.
  virtual void save(const std::filesystem::path& sidecar) const = 0;
};

class MatcherRecognizer final : public Recognizer {
 public:
  // `candidate_text` holds the raw provider vector of every class prompt,
  // one row per class in LabelSpace order.
  MatcherRecognizer(MatcherParams<float> params, LabelSpace labels, PromptTemplate templates,
                    Matrix candidate_text, nlohmann::json provider);

  ModelKind kind() const override { return ModelKind::Matcher; }
  Prediction explain(const RecordingFeatures& rec, std::string_view target_word) const override;
  void save(const std::filesystem::path& sidecar) const override;

  const MatcherParams<float>& params() const noexcept { return params_; }
  const LabelSpace& labels() const noexcept { return labels_; }
  const std::vector<Candidate<float>>& candidates() const noexcept { return candidates_; }

 private:
  MatcherParams<float> params_;
  LabelSpace labels_;
  PromptTemplate templates_;
  Matrix candidate_text_;
  nlohmann::json provider_;
  std::vector<Candidate<float>> candidates_;
};

class ClassifierRecognizer final : public Recognizer {
 public:
  ClassifierRecognizer(MlpParams<float> params, LabelSpace labels);

  ModelKind kind() const override { return ModelKind::Classifier; }
  Prediction explain(const RecordingFeatures& rec, std::string_view target_word) const override;
  void save(const std::filesystem::path& sidecar) const override;

  const MlpParams<float>& params() const noexcept { return params_; }

 private:
  MlpParams<float> params_;
  LabelSpace labels_;
};

class CtcRecognizer final : public Recognizer {
 public:
  CtcRecognizer(CtcParams<float> params, Alphabet alphabet, AsrDecisionOptions options);

  ModelKind kind() const override { return ModelKind::Ctc; }
  Prediction explain(const RecordingFeatures& rec, std::string_view target_word) const override;
  void save(const std::filesystem::path& sidecar) const override;

  const CtcParams<float>& params() const noexcept { return params_; }
  const Alphabet& alphabet() const noexcept { return alphabet_; }

 private:
  CtcParams<float> params_;
  Alphabet alphabet_;
  AsrDecisionOptions options_;
};

std::unique_ptr<Recognizer> load_recognizer(const std::filesystem::path& sidecar);

// Raw provider vector for every class prompt, LabelSpace order.
Matrix class_prompt_matrix(const LabelSpace& labels, const PromptTemplate& templates,
                           const TextEmbeddingProvider& provider);

}  // namespace namegate
