#include "namegate/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <thread>
#include <tuple>

#include "namegate/errors.hpp"

namespace namegate {

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("short write to " + p.string());
}

void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

nlohmann::ordered_json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

FoldEvaluation evaluate_fold(const Recognizer& model, const FoldSpec& fold, const FeatureStore& store,
                             const LabelSpace& labels) {
  const auto& entries = store.dataset().entries;
  const auto test = indices_for_speakers(store.dataset(), {fold.test_speaker});
  if (test.empty()) throw EmptyInputError("no recordings for test speaker " + fold.test_speaker);
  ConfusionMatrix cm(labels.class_count());
  FoldEvaluation out;
  out.predictions.reserve(test.size());
  for (std::size_t i : test) {
    const auto truth = label_of(entries[i]);
    const auto predicted = model.predict(store.features(i), entries[i].target_word);
    cm.add(labels.index_of(truth), labels.index_of(predicted));
    out.predictions.push_back({entries[i].recording_id, truth.name(), predicted.name()});
  }
  out.metrics = compute_metrics(cm);
  return out;
}

FoldEvaluation evaluate_predictions(const Dataset& dataset,
                                    const std::map<std::string, std::string>& predicted,
                                    const LabelSpace& labels) {
  ConfusionMatrix cm(labels.class_count());
  FoldEvaluation out;
  std::size_t matched = 0;
  for (const auto& e : dataset.entries) {
    const auto it = predicted.find(e.recording_id);
    if (it == predicted.end()) throw ConsistencyError("no prediction for recording " + e.recording_id);
    ++matched;
    const auto truth = label_of(e);
    const auto label = labels.parse(it->second);
    cm.add(labels.index_of(truth), labels.index_of(label));
    out.predictions.push_back({e.recording_id, truth.name(), label.name()});
  }
  if (matched != predicted.size()) {
    throw ConsistencyError(std::to_string(predicted.size() - matched) +
                           " predictions name recordings missing from the manifest");
  }
  out.metrics = compute_metrics(cm);
  return out;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw EmptyInputError("mean_std: no values");
  MeanStd m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(sq / static_cast<double>(values.size()));
  return m;
}

void aggregate(CvSummary& s) {
  std::vector<double> acc, p, r, f;
  for (const auto& fold : s.folds) {
    acc.push_back(fold.evaluation.metrics.accuracy);
    p.push_back(fold.evaluation.metrics.macro_precision);
    r.push_back(fold.evaluation.metrics.macro_recall);
    f.push_back(fold.evaluation.metrics.macro_f1);
  }
  s.accuracy = mean_std(acc);
  s.precision = mean_std(p);
  s.recall = mean_std(r);
  s.f1 = mean_std(f);
}

CvSummary crossval(const RunConfig& config, const FeatureStore& store,
                   const TextEmbeddingProvider* provider, std::size_t jobs) {
  const Dataset& dataset = store.dataset();
  const LabelSpace labels(dataset.vocabulary);
  const auto folds = loso_folds(dataset, config.seed);
  const TrainInputs inputs{&store, provider, labels};

  CvSummary s;
  s.kind = config.model.kind;
  for (std::size_t k = 0; k < labels.class_count(); ++k) s.classes.push_back(labels.label_at(k).name());
  s.folds.resize(folds.size());

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(folds.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < folds.size(); i = next++) {
      try {
        auto selection = select_lr(config.train, config.model, folds[i], inputs);
        auto& out = s.folds[i];
        out.fold = folds[i];
        out.lr = selection.lr;
        out.runs = std::move(selection.runs);
        out.evaluation = evaluate_fold(*selection.model, folds[i], store, labels);
        out.model = std::move(selection.model);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, folds.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  aggregate(s);
  return s;
}

CvSummary crossval(const RunConfig& config, std::size_t jobs) {
  const Dataset dataset = load_dataset(config.resolve(config.manifest));
  const FeatureStore store(dataset, config.model.kind == ModelKind::Ctc);
  std::unique_ptr<TextEmbeddingProvider> provider;
  if (!config.provider.is_null()) provider = make_provider(config.provider, config.base_dir);
  return crossval(config, store, provider.get(), jobs);
}

nlohmann::ordered_json to_json(const CvSummary& s) {
  nlohmann::ordered_json j;
  j["approach"] = to_string(s.kind);
  j["fold_count"] = s.folds.size();
  j["classes"] = s.classes;
  j["summary"] = {{"accuracy", to_json(s.accuracy)},
                  {"precision", to_json(s.precision)},
                  {"recall", to_json(s.recall)},
                  {"f1", to_json(s.f1)}};
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& f : s.folds) {
    nlohmann::ordered_json fj;
    fj["test_speaker"] = f.fold.test_speaker;
    fj["val_speaker"] = f.fold.val_speaker;
    fj["train_speakers"] = f.fold.train_speakers;
    fj["seed"] = f.fold.seed;
    fj["selected_lr"] = f.lr;
    fj["metrics"] = to_json(f.evaluation.metrics, s.classes);
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& r : f.runs) runs.push_back(to_json(r));
    fj["lr_runs"] = std::move(runs);
    folds.push_back(std::move(fj));
  }
  j["folds"] = std::move(folds);
  return j;
}

std::string csv_header() {
  return "approach,accuracy_mean,accuracy_std,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std";
}

std::string csv_row(const CvSummary& s) {
  std::string row = to_string(s.kind);
  for (const auto* m : {&s.accuracy, &s.precision, &s.recall, &s.f1}) {
    row += "," + fixed(m->mean) + "," + fixed(m->std);
  }
  return row;
}

void write_crossval(const CvSummary& s, const RunConfig& config, const std::filesystem::path& out_dir,
                    const nlohmann::ordered_json& metadata) {
  ensure_dir(out_dir);
  nlohmann::ordered_json doc;
  nlohmann::ordered_json meta = metadata.is_null() ? nlohmann::ordered_json::object() : metadata;
  meta["metrics_conventions"] = metrics_conventions();
  meta["config"] = to_json(config);
  doc["metadata"] = std::move(meta);
  const auto body = to_json(s);
  for (const auto& [key, value] : body.items()) doc[key] = value;
  write_text(out_dir / "summary.json", doc.dump(2) + "\n");
  write_text(out_dir / "summary.csv", csv_header() + "\n" + csv_row(s) + "\n");

  if (!config.eval.write_checkpoints && !config.eval.write_predictions) return;
  for (const auto& f : s.folds) {
    const auto dir = out_dir / "folds" / f.fold.test_speaker;
    ensure_dir(dir);
    if (config.eval.write_checkpoints && f.model) f.model->save(dir / "checkpoint.json");
    if (config.eval.write_predictions) {
      std::string lines;
      for (const auto& p : f.evaluation.predictions) {
        nlohmann::ordered_json j;
        j["recording_id"] = p.recording_id;
        j["truth"] = p.truth;
        j["predicted"] = p.predicted;
        lines += j.dump() + "\n";
      }
      write_text(dir / "predictions.jsonl", lines);
    }
  }
}

std::vector<LayerScore> layer_sweep(const std::vector<std::pair<int, std::filesystem::path>>& layers,
                                    const RunConfig& config, std::size_t jobs) {
  if (layers.empty()) throw EmptyInputError("layer sweep needs at least one layer");
  RunConfig cfg = config;
  if (cfg.model.kind != ModelKind::Classifier) {
    throw ConfigError("layer sweep runs the classification baseline; set model.kind to classifier");
  }

  using Key = std::tuple<std::string, std::string, std::string, bool>;
  std::vector<Key> reference;
  std::vector<LayerScore> out;
  for (const auto& [layer, manifest] : layers) {
    const Dataset dataset = load_dataset(config.resolve(manifest));
    std::vector<Key> keys;
    for (const auto& e : dataset.entries) keys.emplace_back(e.recording_id, e.speaker_id, e.target_word, e.correct);
    std::sort(keys.begin(), keys.end());
    if (out.empty()) {
      reference = std::move(keys);
    } else if (keys != reference) {
      throw ConsistencyError("layer " + std::to_string(layer) + " does not hold the same recordings as layer " +
                             std::to_string(out.front().layer));
    }
    const FeatureStore store(dataset, false);
    cfg.manifest = manifest;
    const auto summary = crossval(cfg, store, nullptr, jobs);
    out.push_back({layer, manifest, summary.accuracy});
  }
  std::stable_sort(out.begin(), out.end(), [](const LayerScore& a, const LayerScore& b) {
    if (a.accuracy.mean != b.accuracy.mean) return a.accuracy.mean > b.accuracy.mean;
    return a.layer < b.layer;
  });
  return out;
}

std::vector<std::pair<int, std::filesystem::path>> read_layer_index(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  if (!j.is_object() || !j.contains("layers") || !j["layers"].is_array()) {
    throw ConfigError(path.string() + ": expected {\"layers\": [...]}");
  }
  const auto base = std::filesystem::absolute(path).parent_path();
  std::vector<std::pair<int, std::filesystem::path>> out;
  try {
    for (const auto& item : j["layers"]) {
      std::filesystem::path p = item.at("manifest").get<std::string>();
      out.emplace_back(item.at("layer").get<int>(), p.is_absolute() ? p : base / p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return out;
}

nlohmann::ordered_json to_json(const std::vector<LayerScore>& ranking) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    arr.push_back({{"rank", r + 1},
                   {"layer", ranking[r].layer},
                   {"accuracy_mean", ranking[r].accuracy.mean},
                   {"accuracy_std", ranking[r].accuracy.std}});
  }
  return arr;
}

}  // namespace namegate
