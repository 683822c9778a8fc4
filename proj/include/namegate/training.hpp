#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "namegate/dataio.hpp"
#include "namegate/features.hpp"
#include "namegate/models.hpp"
#include "namegate/prompts.hpp"

namespace namegate {

enum class SelectionMetric { MacroF1, Wer };

std::string to_string(SelectionMetric m);
SelectionMetric selection_metric_for(ModelKind kind);

struct TrainConfig {
  std::size_t max_epochs = 30;
  std::size_t batch_size = 32;
  std::size_t validate_every = 5;
  std::vector<double> lr_grid{5e-5, 1e-5};
  // Stop after this many validation points without improvement.
  std::size_t patience = 3;
  std::uint64_t seed = 0;

  // Throws ConfigError on an empty grid or a schedule that never validates.
  void validate() const;
  // Grid the toolkit uses when a run configuration gives none.
  static std::vector<double> default_lr_grid(ModelKind kind);
};

struct ValidationPoint {
  std::size_t epoch = 0;
  double metric = 0.0;
};

struct TrainReport {
  ModelKind objective = ModelKind::Matcher;
  SelectionMetric selection = SelectionMetric::MacroF1;
  double lr = 0.0;
  std::uint64_t seed = 0;
  std::string test_speaker;
  std::string val_speaker;
  std::vector<std::string> train_speakers;
  std::size_t train_size = 0;
  std::size_t train_incorrect = 0;
  std::size_t val_size = 0;
  std::size_t skipped_batches = 0;      // size-1 batches dropped
  std::size_t skipped_utterances = 0;   // CTC: too few frames for the target
  std::vector<double> epoch_losses;
  std::vector<ValidationPoint> validation;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  std::size_t stopped_epoch = 0;
};

nlohmann::ordered_json to_json(const TrainReport& r);

struct TrainResult {
  TrainReport report;
  std::unique_ptr<Recognizer> model;  // parameters at best_epoch
};

// Shared, read-only inputs of a training session.
struct TrainInputs {
  const FeatureStore* store = nullptr;
  const TextEmbeddingProvider* provider = nullptr;  // matcher only
  LabelSpace labels;
};

// One run at a fixed learning rate. `seed` drives init and shuffling.
TrainResult train_one(const TrainConfig& config, const ModelOptions& model, const FoldSpec& fold,
                      const TrainInputs& inputs, double lr, std::uint64_t seed);

struct LrSelection {
  double lr = 0.0;
  std::size_t index = 0;
  std::vector<TrainReport> runs;  // one per grid entry, grid order
  std::unique_ptr<Recognizer> model;
};

// Trains once per grid entry (seed derived from the fold seed and the grid
// index) and keeps the run with the best validation metric; ties go to
// the smaller learning rate.
LrSelection select_lr(const TrainConfig& config, const ModelOptions& model, const FoldSpec& fold,
                      const TrainInputs& inputs);

// Entry indices of the given speakers, manifest order.
std::vector<std::size_t> indices_for_speakers(const Dataset& d, const std::vector<std::string>& speakers);

}  // namespace namegate
