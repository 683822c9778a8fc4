#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "namegate/config.hpp"
#include "namegate/features.hpp"
#include "namegate/metrics.hpp"
#include "namegate/training.hpp"

namespace namegate {

struct PredictionRecord {
  std::string recording_id;
  std::string truth;
  std::string predicted;
};

struct FoldEvaluation {
  MetricsReport metrics;
  std::vector<PredictionRecord> predictions;  // manifest order
};

// Predicts every test-speaker recording through the model's decision rule.
FoldEvaluation evaluate_fold(const Recognizer& model, const FoldSpec& fold, const FeatureStore& store,
                             const LabelSpace& labels);

// Scores externally produced predictions, keyed by recording id, against a
// dataset. Every recording needs exactly one prediction.
FoldEvaluation evaluate_predictions(const Dataset& dataset,
                                    const std::map<std::string, std::string>& predicted,
                                    const LabelSpace& labels);

struct FoldOutcome {
  FoldSpec fold;
  double lr = 0.0;
  std::vector<TrainReport> runs;
  FoldEvaluation evaluation;
  std::unique_ptr<Recognizer> model;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(const std::vector<double>& values);

struct CvSummary {
  ModelKind kind = ModelKind::Matcher;
  std::vector<std::string> classes;
  std::vector<FoldOutcome> folds;  // ordered by test speaker
  MeanStd accuracy;
  MeanStd precision;
  MeanStd recall;
  MeanStd f1;
};

// Fills the mean/std fields from the per-fold reports.
void aggregate(CvSummary& summary);

// Full leave-one-speaker-out run. Folds train on up to `jobs` threads;
// results do not depend on `jobs`.
CvSummary crossval(const RunConfig& config, const FeatureStore& store,
                   const TextEmbeddingProvider* provider, std::size_t jobs = 1);

// Loads data and provider as the configuration says, then runs crossval.
CvSummary crossval(const RunConfig& config, std::size_t jobs = 1);

// Report without any timestamp.
nlohmann::ordered_json to_json(const CvSummary& s);

std::string csv_header();
std::string csv_row(const CvSummary& s);

// summary.json (with `metadata` merged in), summary.csv and, per fold,
// folds/<speaker>/{checkpoint.json, predictions.jsonl} as the eval options ask.
void write_crossval(const CvSummary& s, const RunConfig& config, const std::filesystem::path& out_dir,
                    const nlohmann::ordered_json& metadata);

struct LayerScore {
  int layer = 0;
  std::filesystem::path manifest;
  MeanStd accuracy;
};

// Classifier crossval per layer under one configuration; sorted by mean
// accuracy, ties to the lower layer. Throws ConsistencyError when the
// layers do not hold the same recordings and labels.
std::vector<LayerScore> layer_sweep(const std::vector<std::pair<int, std::filesystem::path>>& layers,
                                    const RunConfig& config, std::size_t jobs = 1);

// {"layers": [{"layer": k, "manifest": path}, ...]}; paths relative to the file.
std::vector<std::pair<int, std::filesystem::path>> read_layer_index(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const std::vector<LayerScore>& ranking);

}  // namespace namegate
