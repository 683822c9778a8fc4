// namegate command-line driver.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "namegate/config.hpp"
#include "namegate/errors.hpp"
#include "namegate/evaluation.hpp"
#include "namegate/gradsuite.hpp"
#include "namegate/synthdata.hpp"

namespace fs = std::filesystem;
using namespace namegate;

namespace {

enum Exit { kOk = 0, kNegative = 1, kConfig = 2, kIo = 3, kNumeric = 4 };

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::size_t default_jobs() {
  if (const char* env = std::getenv("NAMEGATE_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError("NAMEGATE_JOBS must be a positive integer");
  }
  return 1;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc | std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + p.string());
}

int gen_synth(const fs::path& spec_path, const fs::path& out) {
  const auto spec = parse_synth_spec(read_json_file(spec_path));
  const auto result = generate(spec, out);
  std::cout << result.manifest.string() << "\n";
  return kOk;
}

int crossval_cmd(const fs::path& config_path, const fs::path& out, const std::string& model,
                 std::optional<std::size_t> jobs) {
  std::optional<ModelKind> kind;
  if (!model.empty()) kind = parse_model_kind(model);
  const auto config = load_run_config(config_path, kind);
  const auto summary = crossval(config, jobs ? *jobs : default_jobs());
  nlohmann::ordered_json meta;
  meta["generated_at"] = utc_now();
  write_crossval(summary, config, out, meta);
  std::cout << csv_header() << "\n" << csv_row(summary) << "\n";
  return kOk;
}

int infer_cmd(const fs::path& checkpoint, const fs::path& embedding, const std::string& target) {
  const auto model = load_recognizer(checkpoint);
  const Matrix frames = read_embedding_file(embedding);
  RecordingFeatures rec;
  rec.pooled = pool_mean(frames);
  rec.frames = &frames;
  const auto p = model->explain(rec, target);
  const bool positive = p.label == PromptLabel::word(target);
  nlohmann::ordered_json j;
  j["target"] = target;
  j["predicted"] = p.label.name();
  j["verdict"] = positive ? "correct" : "incorrect";
  nlohmann::ordered_json scores = nlohmann::ordered_json::object();
  for (const auto& [name, score] : p.scores) scores[name] = score;
  j["scores"] = std::move(scores);
  if (p.transcription) j["transcription"] = *p.transcription;
  std::cout << j.dump(2) << "\n";
  return positive ? kOk : kNegative;
}

int gradcheck_cmd(std::size_t seeds, std::uint64_t first) {
  std::vector<std::uint64_t> list;
  for (std::size_t i = 0; i < seeds; ++i) list.push_back(first + i);
  const auto report = run_gradient_suite(list);
  for (const char* m : {"matcher", "classifier", "ctc"}) {
    std::cout << m << " max_relative_error " << report.worst(m) << "\n";
  }
  std::cout << (report.passed() ? "all below " : "FAILED: not all below ") << kGradCheckTolerance << "\n";
  return report.passed() ? kOk : kNumeric;
}

int layer_sweep_cmd(const fs::path& config_path, const fs::path& layers_path, const fs::path& out,
                    std::optional<std::size_t> jobs) {
  const auto config = load_run_config(config_path, ModelKind::Classifier);
  const auto ranking = layer_sweep(read_layer_index(layers_path), config, jobs ? *jobs : default_jobs());
  nlohmann::ordered_json doc;
  doc["metadata"] = {{"generated_at", utc_now()}, {"config", to_json(config)}};
  doc["ranking"] = to_json(ranking);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string());
  write_file(out / "ranking.json", doc.dump(2) + "\n");
  for (const auto& r : ranking) std::cout << r.layer << " " << r.accuracy.mean << " " << r.accuracy.std << "\n";
  return kOk;
}

int eval_cmd(const fs::path& predictions, const fs::path& manifest) {
  const Dataset dataset = load_dataset(manifest);
  std::ifstream in(predictions);
  if (!in) throw IoError("cannot open " + predictions.string());
  std::map<std::string, std::string> predicted;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = predictions.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      auto id = j.at("recording_id").get<std::string>();
      auto label = j.at("predicted").get<std::string>();
      if (!predicted.emplace(std::move(id), std::move(label)).second) {
        throw LoadError(where + ": duplicate recording_id");
      }
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(where + ": " + e.what());
    }
  }
  const LabelSpace labels(dataset.vocabulary);
  const auto result = evaluate_predictions(dataset, predicted, labels);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < labels.class_count(); ++k) names.push_back(labels.label_at(k).name());
  nlohmann::ordered_json doc;
  doc["metrics_conventions"] = metrics_conventions();
  doc["metrics"] = to_json(result.metrics, names);
  std::cout << doc.dump(2) << "\n";
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const LoadError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kIo;
  }
  if (dynamic_cast<const TrainingDivergedError*>(&e) || dynamic_cast<const DegenerateVectorError*>(&e)) {
    return kNumeric;
  }
  return kConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"namegate: audio-text word naming recognizer"};
  app.require_subcommand(1);

  fs::path spec, out, config, checkpoint, embedding, layers, predictions, manifest;
  std::string model, target;
  std::optional<std::size_t> jobs;
  std::size_t seeds = 10;
  std::uint64_t first_seed = 0;

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic dataset");
  gen->add_option("--spec", spec, "synthetic spec JSON")->required();
  gen->add_option("--out", out, "output directory")->required();

  auto* cv = app.add_subcommand("crossval", "leave-one-speaker-out cross-validation");
  cv->add_option("--config", config, "run configuration JSON")->required();
  cv->add_option("--out", out, "output directory")->required();
  cv->add_option("--model", model, "override model.kind")->check(CLI::IsMember({"matcher", "classifier", "ctc"}));
  cv->add_option("--jobs", jobs, "parallel folds (default NAMEGATE_JOBS or 1)")->check(CLI::PositiveNumber);

  auto* inf = app.add_subcommand("infer", "score one recording against a target word");
  inf->add_option("--checkpoint", checkpoint, "checkpoint sidecar JSON")->required();
  inf->add_option("--embedding", embedding, "EMB1 frame file")->required();
  inf->add_option("--target", target, "target word")->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);
  grad->add_option("--first-seed", first_seed, "first seed");

  auto* sweep = app.add_subcommand("layer-sweep", "rank embedding layers with the classifier");
  sweep->add_option("--config", config, "run configuration JSON")->required();
  sweep->add_option("--layers", layers, "layer index JSON")->required();
  sweep->add_option("--out", out, "output directory")->required();
  sweep->add_option("--jobs", jobs, "parallel folds")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("eval", "metrics for a predictions file");
  ev->add_option("--predictions", predictions, "JSON lines of {recording_id, predicted}")->required();
  ev->add_option("--manifest", manifest, "dataset manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return gen_synth(spec, out);
    if (*cv) return crossval_cmd(config, out, model, jobs);
    if (*inf) return infer_cmd(checkpoint, embedding, target);
    if (*grad) return gradcheck_cmd(seeds, first_seed);
    if (*sweep) return layer_sweep_cmd(config, layers, out, jobs);
    if (*ev) return eval_cmd(predictions, manifest);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kConfig;
}
