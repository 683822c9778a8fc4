#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "namegate/dataio.hpp"
#include "namegate/matrix.hpp"

namespace namegate {

enum class MispronounceMode { Noise, Swap, Blend };

std::string to_string(MispronounceMode m);
MispronounceMode parse_mispronounce_mode(std::string_view name);

// Per-layer copies of the same recordings whose noise grows with the
// distance from peak_layer: sigma_k = sigma_within * (1 + noise_slope * |k - peak_layer|).
struct LayerSweepSpec {
  std::vector<int> layers;
  int peak_layer = 12;
  double noise_slope = 0.5;
};

struct SynthSpec {
  std::size_t n_speakers = 10;
  std::size_t n_words = 12;
  std::size_t repeats = 4;
  double correct_rate = 0.9;
  std::size_t frame_dim = 32;
  std::size_t text_dim = 64;
  std::size_t frames_min = 20;
  std::size_t frames_max = 120;
  double sigma_within = 0.05;   // per-coordinate, per-frame noise
  double sigma_speaker = 0.02;  // per-coordinate speaker offset
  MispronounceMode mode = MispronounceMode::Swap;
  // Swap and blend negatives draw from this many out-of-vocabulary centroids.
  std::size_t distractors = 8;
  std::uint64_t seed = 0;
  std::optional<LayerSweepSpec> sweep;

  void validate() const;
  // "ds1-like" or "ds2-like"; other fields keep their defaults.
  static SynthSpec preset(std::string_view name);
};

// Strict: unknown keys throw ConfigError. A "preset" key seeds the fields
// before the remaining keys override them.
SynthSpec parse_synth_spec(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SynthSpec& s);

// Deterministic pronounceable pseudo-words, sorted.
std::vector<std::string> synth_words(std::size_t n);

struct SynthRecording {
  ManifestEntry entry;
  Matrix frames;
  std::string source;  // "word", "noise", "distractor:<k>" or "blend:<k>"
  double blend = 1.0;  // weight of the target centroid (blend mode)
};

struct SynthData {
  std::vector<std::string> vocabulary;
  std::vector<std::string> speakers;
  Matrix centroids;    // n_words x frame_dim, unit rows, vocabulary order
  Matrix distractors;  // distractors x frame_dim, unit rows
  Matrix text_map;     // frame_dim x text_dim
  // Rendered prompt -> 1 x text_dim unit vector; vocabulary order, then
  // the mispronounced prompt.
  std::vector<std::pair<std::string, Matrix>> prompts;
  std::vector<SynthRecording> recordings;
};

// In-memory generation. `noise_scale` multiplies sigma_within only; every
// other draw is shared, so layer copies differ in noise magnitude alone.
SynthData synthesize(const SynthSpec& spec, double noise_scale = 1.0);

struct SynthOutput {
  std::filesystem::path manifest;
  std::filesystem::path prompts;
  std::filesystem::path truth;
  std::optional<std::filesystem::path> layers;  // layers.json when a sweep is requested
};

// Writes manifest.jsonl, emb/*.emb, prompts.jsonl, prompts/*.emb and
// truth.json under out_dir (plus layer_<k>/ trees for a sweep).
SynthOutput generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace namegate
