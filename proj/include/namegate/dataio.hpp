#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "namegate/matrix.hpp"

namespace namegate {

// EMB1 layout, all little-endian:
//   0  magic "EMB1"
//   4  u32 version = 1
//   8  u32 dtype   = 1 (f32)
//  12  u64 rows
//  20  u64 cols
//  28  rows*cols f32, row-major
inline constexpr std::size_t kEmbHeaderBytes = 28;
inline constexpr std::uint32_t kEmbVersion = 1;
inline constexpr std::uint32_t kEmbDtypeF32 = 1;

struct EmbeddingFileHeader {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
};

std::vector<std::uint8_t> encode_embedding(const Matrix& m);
Matrix decode_embedding(std::span<const std::uint8_t> bytes);

void write_embedding_file(const std::filesystem::path& path, const Matrix& m);
Matrix read_embedding_file(const std::filesystem::path& path);
// Header only; validates the declared payload against the file size.
EmbeddingFileHeader read_embedding_header(const std::filesystem::path& path);

Matrix pool_mean(const Matrix& frames);
Matrix pool_first(const Matrix& frames);

struct ManifestEntry {
  std::string recording_id;
  std::string speaker_id;
  std::string target_word;
  bool correct = false;
  std::string embedding_path;  // relative to the manifest's directory
  std::size_t frames = 0;
  std::size_t dim = 0;
};

struct Dataset {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> vocabulary;  // sorted unique target words
  std::vector<std::string> speakers;    // sorted unique speaker ids
  std::filesystem::path root;           // directory embedding paths resolve against

  std::filesystem::path embedding_file(std::size_t index) const {
    return root / entries.at(index).embedding_path;
  }
  Matrix load_frames(std::size_t index) const { return read_embedding_file(embedding_file(index)); }
};

// Builds vocabulary and speaker lists from entries.
Dataset make_dataset(std::vector<ManifestEntry> entries, std::filesystem::path root);

// JSON-lines manifest. Every line must carry exactly the ManifestEntry
// fields; the referenced file must exist and its header must match.
Dataset load_dataset(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

struct FoldSpec {
  std::string test_speaker;
  std::string val_speaker;
  std::vector<std::string> train_speakers;
  std::uint64_t seed = 0;
};

// One fold per speaker (in sorted speaker order); the validation speaker is
// drawn uniformly from the others with a per-fold stream derived from seed.
std::vector<FoldSpec> loso_folds(const Dataset& d, std::uint64_t seed);

}  // namespace namegate
