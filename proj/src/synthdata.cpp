#include "namegate/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "namegate/errors.hpp"
#include "namegate/ops.hpp"
#include "namegate/prompts.hpp"
#include "namegate/rng.hpp"

namespace namegate {

std::string to_string(MispronounceMode m) {
  switch (m) {
    case MispronounceMode::Noise: return "noise";
    case MispronounceMode::Swap: return "swap";
    case MispronounceMode::Blend: return "blend";
  }
  return "swap";
}

MispronounceMode parse_mispronounce_mode(std::string_view name) {
  if (name == "noise") return MispronounceMode::Noise;
  if (name == "swap") return MispronounceMode::Swap;
  if (name == "blend") return MispronounceMode::Blend;
  throw ConfigError("unknown mispronounce_mode '" + std::string(name) + "' (noise, swap, blend)");
}

void SynthSpec::validate() const {
  if (n_speakers < 3) throw ConfigError("n_speakers must be >= 3");
  if (n_words < 1) throw ConfigError("n_words must be >= 1");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (!(correct_rate > 0.0 && correct_rate <= 1.0)) throw ConfigError("correct_rate must be in (0, 1]");
  if (frame_dim < 2 || text_dim < 2) throw ConfigError("frame_dim and text_dim must be >= 2");
  if (frames_min < 1 || frames_max < frames_min) throw ConfigError("need 1 <= frames_min <= frames_max");
  if (!(sigma_within >= 0.0) || !(sigma_speaker >= 0.0)) throw ConfigError("sigmas must be >= 0");
  if (mode != MispronounceMode::Noise && distractors < 1) {
    throw ConfigError("swap and blend negatives need distractors >= 1");
  }
  if (sweep) {
    if (sweep->layers.empty()) throw ConfigError("layer_sweep.layers must not be empty");
    const std::set<int> unique(sweep->layers.begin(), sweep->layers.end());
    if (unique.size() != sweep->layers.size()) throw ConfigError("layer_sweep.layers has duplicates");
    if (!(sweep->noise_slope >= 0.0)) throw ConfigError("layer_sweep.noise_slope must be >= 0");
  }
}

SynthSpec SynthSpec::preset(std::string_view name) {
  SynthSpec s;
  if (name == "ds1-like") {
    s.n_speakers = 34;
    s.n_words = 90;
    s.repeats = 2;
    s.correct_rate = 0.903;
  } else if (name == "ds2-like") {
    s.n_speakers = 16;
    s.n_words = 56;
    s.repeats = 7;
    s.correct_rate = 0.575;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (ds1-like, ds2-like)");
  }
  return s;
}

SynthSpec parse_synth_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  SynthSpec s;
  if (j.contains("preset")) s = SynthSpec::preset(j["preset"].get<std::string>());
  for (const auto& [key, v] : j.items()) {
    if (key == "preset") continue;
    else if (key == "n_speakers") s.n_speakers = v.get<std::size_t>();
    else if (key == "n_words") s.n_words = v.get<std::size_t>();
    else if (key == "repeats") s.repeats = v.get<std::size_t>();
    else if (key == "correct_rate") s.correct_rate = v.get<double>();
    else if (key == "frame_dim") s.frame_dim = v.get<std::size_t>();
    else if (key == "text_dim") s.text_dim = v.get<std::size_t>();
    else if (key == "frames_min") s.frames_min = v.get<std::size_t>();
    else if (key == "frames_max") s.frames_max = v.get<std::size_t>();
    else if (key == "sigma_within") s.sigma_within = v.get<double>();
    else if (key == "sigma_speaker") s.sigma_speaker = v.get<double>();
    else if (key == "mispronounce_mode") s.mode = parse_mispronounce_mode(v.get<std::string>());
    else if (key == "distractors") s.distractors = v.get<std::size_t>();
    else if (key == "seed") s.seed = v.get<std::uint64_t>();
    else if (key == "layer_sweep") {
      LayerSweepSpec sw;
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "layers") sw.layers = v2.get<std::vector<int>>();
        else if (k2 == "peak_layer") sw.peak_layer = v2.get<int>();
        else if (k2 == "noise_slope") sw.noise_slope = v2.get<double>();
        else throw ConfigError("unknown layer_sweep key '" + k2 + "'");
      }
      s.sweep = sw;
    } else {
      throw ConfigError("unknown synthetic spec key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

nlohmann::ordered_json to_json(const SynthSpec& s) {
  nlohmann::ordered_json j;
  j["n_speakers"] = s.n_speakers;
  j["n_words"] = s.n_words;
  j["repeats"] = s.repeats;
  j["correct_rate"] = s.correct_rate;
  j["frame_dim"] = s.frame_dim;
  j["text_dim"] = s.text_dim;
  j["frames_min"] = s.frames_min;
  j["frames_max"] = s.frames_max;
  j["sigma_within"] = s.sigma_within;
  j["sigma_speaker"] = s.sigma_speaker;
  j["mispronounce_mode"] = to_string(s.mode);
  j["distractors"] = s.distractors;
  j["seed"] = s.seed;
  if (s.sweep) {
    j["layer_sweep"] = {{"layers", s.sweep->layers},
                        {"peak_layer", s.sweep->peak_layer},
                        {"noise_slope", s.sweep->noise_slope}};
  }
  return j;
}

std::vector<std::string> synth_words(std::size_t n) {
  static constexpr std::string_view consonants = "bdfklmnprstv";
  static constexpr std::string_view vowels = "aeiou";
  constexpr std::size_t syllables = consonants.size() * vowels.size();
  constexpr std::size_t space = syllables * syllables * syllables;
  if (n > space) throw ConfigError("n_words too large");
  std::vector<std::string> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t code = (i * 7919 + 13) % space;
    std::string w;
    for (int s = 0; s < 3; ++s) {
      const std::size_t syl = code % syllables;
      code /= syllables;
      w += consonants[syl / vowels.size()];
      w += vowels[syl % vowels.size()];
    }
    words.push_back(std::move(w));
  }
  std::sort(words.begin(), words.end());
  return words;
}

namespace {

Matrix unit_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& x : m.data()) x = static_cast<float>(rng.normal());
  return l2_normalize_rows(m);
}

std::string speaker_name(std::size_t i, std::size_t n) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(n).size());
  std::string digits = std::to_string(i + 1);
  return "spk" + std::string(width - digits.size(), '0') + digits;
}

void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("short write to " + p.string());
}

// Writes recordings under dir/emb and dir/manifest.jsonl.
std::filesystem::path write_recordings(const SynthData& data, const std::filesystem::path& dir) {
  ensure_dir(dir / "emb");
  std::vector<ManifestEntry> entries;
  entries.reserve(data.recordings.size());
  for (const auto& r : data.recordings) {
    write_embedding_file(dir / r.entry.embedding_path, r.frames);
    entries.push_back(r.entry);
  }
  const auto manifest = dir / "manifest.jsonl";
  write_manifest(manifest, entries);
  return manifest;
}

}  // namespace

SynthData synthesize(const SynthSpec& spec, double noise_scale) {
  spec.validate();
  SynthData d;
  d.vocabulary = synth_words(spec.n_words);
  for (std::size_t s = 0; s < spec.n_speakers; ++s) d.speakers.push_back(speaker_name(s, spec.n_speakers));

  Rng centroid_rng(derive_seed(spec.seed, 1));
  d.centroids = unit_rows(spec.n_words, spec.frame_dim, centroid_rng);
  Rng distractor_rng(derive_seed(spec.seed, 2));
  d.distractors = unit_rows(spec.distractors, spec.frame_dim, distractor_rng);

  Rng map_rng(derive_seed(spec.seed, 3));
  d.text_map = Matrix(spec.frame_dim, spec.text_dim);
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(spec.frame_dim));
  for (auto& x : d.text_map.data()) x = static_cast<float>(map_rng.normal() * map_scale);

  const PromptTemplate templates;
  const Matrix word_text = l2_normalize_rows(matmul(d.centroids, d.text_map));
  for (std::size_t w = 0; w < spec.n_words; ++w) {
    d.prompts.emplace_back(render_prompt(PromptLabel::word(d.vocabulary[w]), templates),
                           Matrix(1, spec.text_dim, std::vector<float>(word_text.row(w).begin(), word_text.row(w).end())));
  }
  d.prompts.emplace_back(render_prompt(PromptLabel::mispronounced(), templates),
                         unit_rows(1, spec.text_dim, map_rng));

  const std::size_t span = spec.frames_max - spec.frames_min + 1;
  std::size_t index = 0;
  for (std::size_t s = 0; s < spec.n_speakers; ++s) {
    Rng speaker_rng(derive_seed(spec.seed, 4, s));
    std::vector<double> offset(spec.frame_dim);
    for (auto& x : offset) x = speaker_rng.normal() * spec.sigma_speaker;

    for (std::size_t w = 0; w < spec.n_words; ++w) {
      for (std::size_t r = 0; r < spec.repeats; ++r, ++index) {
        Rng rng(derive_seed(spec.seed, 5, index));
        SynthRecording rec;
        auto& e = rec.entry;
        e.speaker_id = d.speakers[s];
        e.target_word = d.vocabulary[w];
        e.recording_id = e.speaker_id + "_" + e.target_word + "_" + std::to_string(r + 1);
        e.embedding_path = "emb/" + e.recording_id + ".emb";
        e.correct = rng.uniform() < spec.correct_rate;
        e.frames = spec.frames_min + static_cast<std::size_t>(rng.below(span));
        e.dim = spec.frame_dim;

        std::vector<double> base(d.centroids.row(w).begin(), d.centroids.row(w).end());
        rec.source = "word";
        if (!e.correct) {
          if (spec.mode == MispronounceMode::Noise) {
            const Matrix dir = unit_rows(1, spec.frame_dim, rng);
            base.assign(dir.values().begin(), dir.values().end());
            rec.source = "noise";
          } else {
            const std::size_t k = static_cast<std::size_t>(rng.below(spec.distractors));
            const auto other = d.distractors.row(k);
            if (spec.mode == MispronounceMode::Swap) {
              base.assign(other.begin(), other.end());
              rec.source = "distractor:" + std::to_string(k);
            } else {
              rec.blend = rng.uniform(0.3, 0.7);
              for (std::size_t c = 0; c < base.size(); ++c)
                base[c] = rec.blend * base[c] + (1.0 - rec.blend) * other[c];
              rec.source = "blend:" + std::to_string(k);
            }
          }
        }

        const double sigma = spec.sigma_within * noise_scale;
        rec.frames = Matrix(e.frames, spec.frame_dim);
        for (std::size_t t = 0; t < e.frames; ++t) {
          auto row = rec.frames.row(t);
          for (std::size_t c = 0; c < spec.frame_dim; ++c)
            row[c] = static_cast<float>(base[c] + offset[c] + rng.normal() * sigma);
        }
        d.recordings.push_back(std::move(rec));
      }
    }
  }
  return d;
}

SynthOutput generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  const SynthData data = synthesize(spec);
  SynthOutput out;
  out.manifest = write_recordings(data, out_dir);

  ensure_dir(out_dir / "prompts");
  std::vector<std::pair<std::string, std::string>> prompt_files;
  for (std::size_t i = 0; i < data.prompts.size(); ++i) {
    const std::string rel = "prompts/prompt_" + std::to_string(i) + ".emb";
    write_embedding_file(out_dir / rel, data.prompts[i].second);
    prompt_files.emplace_back(data.prompts[i].first, rel);
  }
  out.prompts = out_dir / "prompts.jsonl";
  write_prompt_manifest(out.prompts, prompt_files);

  std::size_t correct = 0;
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (const auto& r : data.recordings) {
    correct += r.entry.correct ? 1 : 0;
    nlohmann::ordered_json j;
    j["recording_id"] = r.entry.recording_id;
    j["correct"] = r.entry.correct;
    j["source"] = r.source;
    if (spec.mode == MispronounceMode::Blend && !r.entry.correct) j["blend"] = r.blend;
    recs.push_back(std::move(j));
  }
  nlohmann::ordered_json truth;
  truth["spec"] = to_json(spec);
  truth["vocabulary"] = data.vocabulary;
  truth["speakers"] = data.speakers;
  truth["counts"] = {{"total", data.recordings.size()},
                     {"correct", correct},
                     {"incorrect", data.recordings.size() - correct}};
  truth["recordings"] = std::move(recs);
  out.truth = out_dir / "truth.json";
  write_text(out.truth, truth.dump(2) + "\n");

  if (spec.sweep) {
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (int k : spec.sweep->layers) {
      const double scale = 1.0 + spec.sweep->noise_slope * std::abs(k - spec.sweep->peak_layer);
      const auto dir = out_dir / ("layer_" + std::to_string(k));
      write_recordings(synthesize(spec, scale), dir);
      layers.push_back({{"layer", k}, {"manifest", "layer_" + std::to_string(k) + "/manifest.jsonl"}});
    }
    nlohmann::ordered_json doc;
    doc["peak_layer"] = spec.sweep->peak_layer;
    doc["layers"] = std::move(layers);
    out.layers = out_dir / "layers.json";
    write_text(*out.layers, doc.dump(2) + "\n");
  }
  return out;
}

}  // namespace namegate
