#include "namegate/prompts.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "namegate/rng.hpp"

namespace namegate {

LabelSpace::LabelSpace(std::vector<std::string> vocabulary) : vocabulary_(std::move(vocabulary)) {
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (vocabulary_[i] == kMispronounced) {
      throw ConfigError("vocabulary may not contain the reserved word 'mispronounced'");
    }
    if (i > 0 && !(vocabulary_[i - 1] < vocabulary_[i])) {
      throw ConfigError("vocabulary must be sorted and unique");
    }
    index_.emplace(vocabulary_[i], i);
  }
}

std::size_t LabelSpace::index_of(const PromptLabel& label) const {
  if (label.is_mispronounced()) return mispronounced_index();
  const auto it = index_.find(label.target());
  if (it == index_.end()) throw IndexError("word '" + label.target() + "' is not in the vocabulary");
  return it->second;
}

PromptLabel LabelSpace::label_at(std::size_t index) const {
  if (index == mispronounced_index()) return PromptLabel::mispronounced();
  if (index > mispronounced_index()) {
    throw IndexError("class index " + std::to_string(index) + " out of range");
  }
  return PromptLabel::word(vocabulary_[index]);
}

PromptLabel LabelSpace::parse(std::string_view name) const {
  if (name == kMispronounced) return PromptLabel::mispronounced();
  if (!contains(name)) throw IndexError("word '" + std::string(name) + "' is not in the vocabulary");
  return PromptLabel::word(std::string(name));
}

bool LabelSpace::contains(std::string_view word) const { return index_.find(word) != index_.end(); }

void PromptTemplate::validate() const {
  static constexpr std::string_view kPlaceholder = "{word}";
  const auto first = positive_template.find(kPlaceholder);
  if (first == std::string::npos) {
    throw ConfigError("positive template '" + positive_template + "' has no {word} placeholder");
  }
  if (positive_template.find(kPlaceholder, first + 1) != std::string::npos) {
    throw ConfigError("positive template '" + positive_template + "' has more than one {word}");
  }
}

std::string render_prompt(const PromptLabel& label, const PromptTemplate& t) {
  if (label.is_mispronounced()) return t.negative_text;
  std::string out = t.positive_template;
  const auto at = out.find("{word}");
  if (at == std::string::npos) return out;
  return out.replace(at, 6, label.target());
}

PromptLabel label_of(const ManifestEntry& e) {
  return e.correct ? PromptLabel::word(e.target_word) : PromptLabel::mispronounced();
}

SyntheticTextProvider::SyntheticTextProvider(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim_ < 1) throw ConfigError("synthetic provider dim must be >= 1");
}

Matrix SyntheticTextProvider::embed(std::string_view prompt) const {
  const std::uint64_t key = mix64(hash64(prompt) ^ mix64(seed_));
  std::vector<double> v(dim_);
  double sq = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    v[i] = counter_normal(key, i);
    sq += v[i] * v[i];
  }
  const double norm = std::sqrt(sq);
  Matrix out(1, dim_);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

nlohmann::json SyntheticTextProvider::describe() const {
  return {{"mode", "synthetic"}, {"dim", dim_}, {"seed", seed_}};
}

FileBackedTextProvider::FileBackedTextProvider(const std::filesystem::path& manifest)
    : manifest_(manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open prompt manifest " + manifest.string());
  const auto root = manifest.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
      throw LoadError(where + ": " + ex.what());
    }
    if (!j.is_object() || j.size() != 2 || !j.contains("prompt") || !j.contains("embedding_path") ||
        !j["prompt"].is_string() || !j["embedding_path"].is_string()) {
      throw LoadError(where + ": expected exactly {\"prompt\", \"embedding_path\"} strings");
    }
    const auto prompt = j["prompt"].get<std::string>();
    Matrix v;
    try {
      v = pool_first(read_embedding_file(root / j["embedding_path"].get<std::string>()));
    } catch (const Error& ex) {
      throw LoadError(where + ": " + ex.what());
    }
    if (dim_ == 0) dim_ = v.cols();
    if (v.cols() != dim_) {
      throw LoadError(where + ": prompt vector has " + std::to_string(v.cols()) +
                      " columns, expected " + std::to_string(dim_));
    }
    if (!vectors_.emplace(prompt, std::move(v)).second) {
      throw LoadError(where + ": duplicate prompt '" + prompt + "'");
    }
  }
  if (vectors_.empty()) throw LoadError(manifest.string() + ": no prompts");
}

Matrix FileBackedTextProvider::embed(std::string_view prompt) const {
  const auto it = vectors_.find(prompt);
  if (it == vectors_.end()) {
    throw UnknownPromptError("no stored embedding for prompt '" + std::string(prompt) + "'");
  }
  return it->second;
}

nlohmann::json FileBackedTextProvider::describe() const {
  return {{"mode", "file_backed"}, {"manifest", manifest_.string()}, {"dim", dim_}};
}

void write_prompt_manifest(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& prompt_to_file) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [prompt, file] : prompt_to_file) {
    nlohmann::ordered_json j;
    j["prompt"] = prompt;
    j["embedding_path"] = file;
    out << j.dump() << '\n';
  }
}

std::unique_ptr<TextEmbeddingProvider> make_provider(const nlohmann::json& config,
                                                     const std::filesystem::path& base) {
  if (!config.is_object() || !config.contains("mode")) {
    throw ConfigError("provider config needs a 'mode'");
  }
  const auto mode = config["mode"].get<std::string>();
  if (mode == "synthetic") {
    for (const auto& [key, _] : config.items()) {
      if (key != "mode" && key != "dim" && key != "seed") {
        throw ConfigError("unknown provider key '" + key + "'");
      }
    }
    return std::make_unique<SyntheticTextProvider>(config.value("dim", std::size_t{64}),
                                                   config.value("seed", std::uint64_t{0}));
  }
  if (mode == "file_backed") {
    for (const auto& [key, _] : config.items()) {
      if (key != "mode" && key != "manifest") throw ConfigError("unknown provider key '" + key + "'");
    }
    if (!config.contains("manifest")) throw ConfigError("file_backed provider needs 'manifest'");
    std::filesystem::path p = config["manifest"].get<std::string>();
    if (p.is_relative()) p = base / p;
    return std::make_unique<FileBackedTextProvider>(p);
  }
  throw ConfigError("unknown provider mode '" + mode + "'");
}

}  // namespace namegate
