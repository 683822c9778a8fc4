#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "namegate/dataio.hpp"
#include "namegate/matrix.hpp"

namespace namegate {

inline constexpr std::string_view kMispronounced = "mispronounced";

// Class of a recording: the target word it correctly names, or the single
// generic mispronounced class.
class PromptLabel {
 public:
  static PromptLabel word(std::string w) { return PromptLabel(std::move(w)); }
  static PromptLabel mispronounced() { return PromptLabel(); }

  bool is_word() const noexcept { return !word_.empty(); }
  bool is_mispronounced() const noexcept { return word_.empty(); }
  const std::string& target() const noexcept { return word_; }
  std::string name() const { return is_word() ? word_ : std::string(kMispronounced); }

  bool operator==(const PromptLabel&) const = default;

 private:
  PromptLabel() = default;
  explicit PromptLabel(std::string w) : word_(std::move(w)) {}
  std::string word_;
};

// Fixed class ordering: vocabulary (sorted) then mispronounced last.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> vocabulary);

  std::size_t class_count() const noexcept { return vocabulary_.size() + 1; }
  std::size_t mispronounced_index() const noexcept { return vocabulary_.size(); }
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }

  std::size_t index_of(const PromptLabel& label) const;
  PromptLabel label_at(std::size_t index) const;
  // "mispronounced" or a vocabulary word.
  PromptLabel parse(std::string_view name) const;
  bool contains(std::string_view word) const;

 private:
  std::vector<std::string> vocabulary_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct PromptTemplate {
  std::string positive_template = "Correct pronunciation of the word {word}";
  std::string negative_text = "Mispronounced word";

  // Throws ConfigError unless positive_template has exactly one {word}.
  void validate() const;
};

std::string render_prompt(const PromptLabel& label, const PromptTemplate& t);

PromptLabel label_of(const ManifestEntry& e);

class UnknownPromptError : public Error {
 public:
  using Error::Error;
};

class TextEmbeddingProvider {
 public:
  virtual ~TextEmbeddingProvider() = default;
  // 1 x dim(); the same prompt always yields the same vector.
  virtual Matrix embed(std::string_view prompt) const = 0;
  virtual std::size_t dim() const = 0;
  virtual nlohmann::json describe() const = 0;
};

// Hash of the prompt keys a counter-based normal stream; the draw is L2
// normalized.
class SyntheticTextProvider final : public TextEmbeddingProvider {
 public:
  SyntheticTextProvider(std::size_t dim, std::uint64_t seed);
  Matrix embed(std::string_view prompt) const override;
  std::size_t dim() const override { return dim_; }
  nlohmann::json describe() const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Precomputed prompt vectors from a JSON-lines manifest of
// {"prompt", "embedding_path"}; multi-row files are reduced to their first
// row.
class FileBackedTextProvider final : public TextEmbeddingProvider {
 public:
  explicit FileBackedTextProvider(const std::filesystem::path& manifest);
  Matrix embed(std::string_view prompt) const override;
  std::size_t dim() const override { return dim_; }
  nlohmann::json describe() const override;

 private:
  std::filesystem::path manifest_;
  std::size_t dim_ = 0;
  std::map<std::string, Matrix, std::less<>> vectors_;
};

void write_prompt_manifest(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& prompt_to_file);

// {"mode": "synthetic", "dim": N, "seed": S} or
// {"mode": "file_backed", "manifest": path}; relative paths resolve
// against `base`.
std::unique_ptr<TextEmbeddingProvider> make_provider(const nlohmann::json& config,
                                                     const std::filesystem::path& base);

}  // namespace namegate
