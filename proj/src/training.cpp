#include "namegate/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include "namegate/ctc.hpp"
#include "namegate/metrics.hpp"
#include "namegate/rng.hpp"

namespace namegate {

std::string to_string(SelectionMetric m) { return m == SelectionMetric::MacroF1 ? "macro_f1" : "wer"; }

SelectionMetric selection_metric_for(ModelKind kind) {
  return kind == ModelKind::Ctc ? SelectionMetric::Wer : SelectionMetric::MacroF1;
}

void TrainConfig::validate() const {
  if (lr_grid.empty()) throw ConfigError("train.lr_grid must not be empty");
  for (double lr : lr_grid) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr_grid entries must be finite and >= 0");
  }
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (validate_every < 1 || max_epochs % validate_every != 0) {
    throw ConfigError("train.validate_every must divide train.max_epochs");
  }
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
}

std::vector<double> TrainConfig::default_lr_grid(ModelKind kind) {
  if (kind == ModelKind::Ctc) return {5e-4};
  return {5e-5, 1e-5};
}

nlohmann::ordered_json to_json(const TrainReport& r) {
  nlohmann::ordered_json j;
  j["objective"] = to_string(r.objective);
  j["selection_metric"] = to_string(r.selection);
  j["lr"] = r.lr;
  j["seed"] = r.seed;
  j["test_speaker"] = r.test_speaker;
  j["val_speaker"] = r.val_speaker;
  j["train_speakers"] = r.train_speakers;
  j["train_size"] = r.train_size;
  j["train_incorrect"] = r.train_incorrect;
  j["val_size"] = r.val_size;
  j["skipped_batches"] = r.skipped_batches;
  j["skipped_utterances"] = r.skipped_utterances;
  j["epoch_losses"] = r.epoch_losses;
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& p : r.validation) hist.push_back({{"epoch", p.epoch}, {"metric", p.metric}});
  j["validation"] = std::move(hist);
  j["best_epoch"] = r.best_epoch;
  j["best_metric"] = r.best_metric;
  j["stopped_epoch"] = r.stopped_epoch;
  return j;
}

std::vector<std::size_t> indices_for_speakers(const Dataset& d, const std::vector<std::string>& speakers) {
  const std::set<std::string> wanted(speakers.begin(), speakers.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.entries.size(); ++i)
    if (wanted.contains(d.entries[i].speaker_id)) out.push_back(i);
  return out;
}

namespace {

// One model family's training state, driven by the shared epoch loop.
class Session {
 public:
  virtual ~Session() = default;
  virtual std::size_t min_batch() const = 0;
  // Mean loss of the batch, or nothing if the batch was dropped.
  virtual std::optional<double> train_batch(std::span<const std::size_t> batch) = 0;
  virtual double validate() = 0;
  virtual void snapshot() = 0;
  virtual std::unique_ptr<Recognizer> finish() = 0;
};

OptimState<float> make_optimizer(const ModelOptions& model, double lr) {
  AdamHyper h = model.hyper;
  h.lr = lr;
  return OptimState<float>(model.optimizer, h);
}

void check_loss(double loss) {
  if (!std::isfinite(loss)) throw TrainingDivergedError("training loss became non-finite");
}

double macro_f1_over(const Recognizer& r, const FeatureStore& store, const LabelSpace& labels,
                     const std::vector<std::size_t>& indices) {
  if (indices.empty()) return 0.0;
  ConfusionMatrix cm(labels.class_count());
  const auto& entries = store.dataset().entries;
  for (std::size_t i : indices) {
    const auto predicted = r.predict(store.features(i), entries[i].target_word);
    cm.add(labels.index_of(label_of(entries[i])), labels.index_of(predicted));
  }
  return compute_metrics(cm).macro_f1;
}

class MatcherSession final : public Session {
 public:
  MatcherSession(const ModelOptions& model, const TrainInputs& in, std::vector<std::size_t> val,
                 double lr, std::uint64_t seed)
      : model_(model), in_(in), val_(std::move(val)), optimizer_(make_optimizer(model, lr)) {
    if (in.provider == nullptr) throw ConfigError("matcher training needs a text embedding provider");
    model.templates.validate();
    params_ = init_matcher<float>(in.store->dim(), in.provider->dim(), model.shared_dim, derive_seed(seed, 1));
    if (!model.decay_scalars) {
      params_.audio_log_scale.decay = false;
      params_.text_log_scale.decay = false;
    }
    class_text_ = class_prompt_matrix(in.labels, model.templates, *in.provider);
    best_ = params_;
  }

  std::size_t min_batch() const override { return 2; }

  std::optional<double> train_batch(std::span<const std::size_t> batch) override {
    const auto& entries = in_.store->dataset().entries;
    std::vector<std::size_t> rows;
    std::vector<std::size_t> classes;
    std::set<std::size_t> seen;
    for (std::size_t i : batch) {
      const std::size_t k = in_.labels.index_of(label_of(entries[i]));
      if (model_.drop_duplicate_labels && !seen.insert(k).second) continue;
      rows.push_back(i);
      classes.push_back(k);
    }
    if (rows.size() < min_batch()) return std::nullopt;

    const Matrix audio = in_.store->pooled_rows(rows);
    Matrix text(rows.size(), class_text_.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto src = class_text_.row(classes[r]);
      std::copy(src.begin(), src.end(), text.row(r).begin());
    }
    auto params = params_.all();
    for (auto* p : params) p->zero_grad();
    Tape<float> tape;
    const Var loss = record_matcher_loss(tape, params_, audio, text);
    const double value = tape.scalar(loss);
    check_loss(value);
    tape.backward(loss);
    optimizer_.step(params);
    return value;
  }

  double validate() override {
    const MatcherRecognizer r(params_, in_.labels, model_.templates, class_text_, nlohmann::json::object());
    return macro_f1_over(r, *in_.store, in_.labels, val_);
  }

  void snapshot() override { best_ = params_; }

  std::unique_ptr<Recognizer> finish() override {
    return std::make_unique<MatcherRecognizer>(best_, in_.labels, model_.templates, class_text_,
                                               in_.provider->describe());
  }

 private:
  const ModelOptions& model_;
  const TrainInputs& in_;
  std::vector<std::size_t> val_;
  OptimState<float> optimizer_;
  MatcherParams<float> params_;
  MatcherParams<float> best_;
  Matrix class_text_;
};

class ClassifierSession final : public Session {
 public:
  ClassifierSession(const ModelOptions& model, const TrainInputs& in, std::vector<std::size_t> val,
                    double lr, std::uint64_t seed)
      : in_(in), val_(std::move(val)), optimizer_(make_optimizer(model, lr)) {
    params_ = init_mlp<float>(in.store->dim(), in.labels.class_count(), model.hidden_dim, derive_seed(seed, 2));
    params_.momentum = model.batchnorm_momentum;
    params_.eps = model.batchnorm_eps;
    best_ = params_;
  }

  std::size_t min_batch() const override { return 2; }

  std::optional<double> train_batch(std::span<const std::size_t> batch) override {
    if (batch.size() < min_batch()) return std::nullopt;
    const auto& entries = in_.store->dataset().entries;
    std::vector<std::size_t> classes;
    classes.reserve(batch.size());
    for (std::size_t i : batch) classes.push_back(in_.labels.index_of(label_of(entries[i])));
    auto params = params_.all();
    for (auto* p : params) p->zero_grad();
    Tape<float> tape;
    const Var loss = record_mlp_loss(tape, params_, in_.store->pooled_rows(batch), classes);
    const double value = tape.scalar(loss);
    check_loss(value);
    tape.backward(loss);
    optimizer_.step(params);
    return value;
  }

  double validate() override {
    const ClassifierRecognizer r(params_, in_.labels);
    return macro_f1_over(r, *in_.store, in_.labels, val_);
  }

  void snapshot() override { best_ = params_; }

  std::unique_ptr<Recognizer> finish() override {
    return std::make_unique<ClassifierRecognizer>(best_, in_.labels);
  }

 private:
  const TrainInputs& in_;
  std::vector<std::size_t> val_;
  OptimState<float> optimizer_;
  MlpParams<float> params_;
  MlpParams<float> best_;
};

class CtcSession final : public Session {
 public:
  CtcSession(const ModelOptions& model, const TrainInputs& in, const std::vector<std::size_t>& train,
             std::vector<std::size_t> val, double lr, std::uint64_t seed, std::size_t& skipped)
      : in_(in),
        alphabet_(model.keep_accents ? Alphabet::accented() : Alphabet::folded()),
        options_{model.raw_substring, model.keep_accents},
        optimizer_(make_optimizer(model, lr)) {
    if (!in.store->has_frames()) throw StateError("ctc training needs frame-level features");
    params_ = init_ctc<float>(in.store->dim(), alphabet_.size(), derive_seed(seed, 3));
    best_ = params_;
    const auto& entries = in.store->dataset().entries;
    for (std::size_t i : train) {
      auto target = alphabet_.encode(normalize_text(entries[i].target_word, model.keep_accents));
      if (target.empty() || in.store->frames(i).rows() < ctc_min_frames(target)) {
        ++skipped;
        continue;
      }
      targets_.emplace(i, std::move(target));
    }
    for (std::size_t i : val)
      if (entries[i].correct) val_.push_back(i);
  }

  std::size_t min_batch() const override { return 1; }

  std::optional<double> train_batch(std::span<const std::size_t> batch) override {
    std::vector<std::size_t> usable;
    for (std::size_t i : batch)
      if (targets_.contains(i)) usable.push_back(i);
    if (usable.empty()) return std::nullopt;
    auto params = params_.all();
    for (auto* p : params) p->zero_grad();
    double total = 0.0;
    const float weight = 1.0f / static_cast<float>(usable.size());
    for (std::size_t i : usable) {
      Tape<float> tape;
      const Var loss = tape.scale(record_ctc_loss(tape, params_, in_.store->frames(i), targets_.at(i)), weight);
      total += tape.scalar(loss);
      tape.backward(loss);
    }
    check_loss(total);
    optimizer_.step(params);
    return total;
  }

  // Corpus WER over the correctly named validation utterances.
  double validate() override {
    if (val_.empty()) return 0.0;
    const auto& entries = in_.store->dataset().entries;
    std::size_t edits = 0;
    std::size_t words = 0;
    for (std::size_t i : val_) {
      const auto ref = tokenize(normalize_text(entries[i].target_word, options_.keep_accents));
      const auto hyp = tokenize(transcribe(params_, alphabet_, in_.store->frames(i)));
      edits += edit_distance(ref, hyp);
      words += ref.size();
    }
    return words == 0 ? 0.0 : static_cast<double>(edits) / static_cast<double>(words);
  }

  void snapshot() override { best_ = params_; }

  std::unique_ptr<Recognizer> finish() override {
    return std::make_unique<CtcRecognizer>(best_, alphabet_, options_);
  }

 private:
  const TrainInputs& in_;
  Alphabet alphabet_;
  AsrDecisionOptions options_;
  OptimState<float> optimizer_;
  CtcParams<float> params_;
  CtcParams<float> best_;
  std::map<std::size_t, std::vector<int>> targets_;
  std::vector<std::size_t> val_;
};

bool improves(SelectionMetric m, double candidate, double incumbent) {
  return m == SelectionMetric::MacroF1 ? candidate > incumbent : candidate < incumbent;
}

}  // namespace

TrainResult train_one(const TrainConfig& config, const ModelOptions& model, const FoldSpec& fold,
                      const TrainInputs& inputs, double lr, std::uint64_t seed) {
  config.validate();
  if (inputs.store == nullptr) throw StateError("train_one: no feature store");
  const auto& dataset = inputs.store->dataset();

  TrainReport report;
  report.objective = model.kind;
  report.selection = selection_metric_for(model.kind);
  report.lr = lr;
  report.seed = seed;
  report.test_speaker = fold.test_speaker;
  report.val_speaker = fold.val_speaker;
  report.train_speakers = fold.train_speakers;

  auto train = indices_for_speakers(dataset, fold.train_speakers);
  if (model.kind == ModelKind::Ctc) {
    std::erase_if(train, [&](std::size_t i) { return !dataset.entries[i].correct; });
  }
  const auto val = indices_for_speakers(dataset, {fold.val_speaker});
  report.train_size = train.size();
  for (std::size_t i : train)
    if (!dataset.entries[i].correct) ++report.train_incorrect;
  report.val_size = val.size();

  std::unique_ptr<Session> session;
  switch (model.kind) {
    case ModelKind::Matcher:
      session = std::make_unique<MatcherSession>(model, inputs, val, lr, seed);
      break;
    case ModelKind::Classifier:
      session = std::make_unique<ClassifierSession>(model, inputs, val, lr, seed);
      break;
    case ModelKind::Ctc:
      session = std::make_unique<CtcSession>(model, inputs, train, val, lr, seed, report.skipped_utterances);
      break;
  }
  if (train.size() < session->min_batch()) {
    throw ConfigError("training set for fold '" + fold.test_speaker + "' has " +
                      std::to_string(train.size()) + " usable recordings");
  }

  Rng rng(derive_seed(seed, 4));
  std::vector<std::size_t> order = train;
  std::size_t since_improvement = 0;
  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const auto loss = session->train_batch(std::span<const std::size_t>(order).subspan(start, stop - start));
      if (!loss) {
        ++report.skipped_batches;
        continue;
      }
      loss_sum += *loss;
      ++batches;
    }
    report.epoch_losses.push_back(batches == 0 ? 0.0 : loss_sum / static_cast<double>(batches));
    report.stopped_epoch = epoch;

    if (epoch % config.validate_every != 0) continue;
    const double metric = session->validate();
    report.validation.push_back({epoch, metric});
    if (!have_best || improves(report.selection, metric, report.best_metric)) {
      have_best = true;
      report.best_metric = metric;
      report.best_epoch = epoch;
      session->snapshot();
      since_improvement = 0;
    } else if (++since_improvement >= config.patience) {
      break;
    }
  }
  return TrainResult{std::move(report), session->finish()};
}

LrSelection select_lr(const TrainConfig& config, const ModelOptions& model, const FoldSpec& fold,
                      const TrainInputs& inputs) {
  config.validate();
  LrSelection out;
  const auto metric = selection_metric_for(model.kind);
  for (std::size_t k = 0; k < config.lr_grid.size(); ++k) {
    const double lr = config.lr_grid[k];
    auto result = train_one(config, model, fold, inputs, lr, derive_seed(fold.seed, 100 + k));
    const double score = result.report.best_metric;
    bool take = out.model == nullptr;
    if (!take) {
      const double incumbent = out.runs[out.index].best_metric;
      take = improves(metric, score, incumbent) || (score == incumbent && lr < out.lr);
    }
    if (take) {
      out.lr = lr;
      out.index = k;
      out.model = std::move(result.model);
    }
    out.runs.push_back(std::move(result.report));
  }
  return out;
}

}  // namespace namegate
