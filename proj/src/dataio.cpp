#include "namegate/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "namegate/rng.hpp"

namespace namegate {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return v;
}

// Validates everything but the payload bytes themselves.
EmbeddingFileHeader parse_header(std::span<const std::uint8_t> head, std::uint64_t total_size) {
  if (total_size < kEmbHeaderBytes) {
    throw FormatError(total_size, "EMB1: truncated header, expected " +
                                      std::to_string(kEmbHeaderBytes) + " bytes");
  }
  if (std::memcmp(head.data(), "EMB1", 4) != 0) throw FormatError(0, "EMB1: bad magic");
  if (get_u32(head, 4) != kEmbVersion) {
    throw FormatError(4, "EMB1: unsupported version " + std::to_string(get_u32(head, 4)));
  }
  if (get_u32(head, 8) != kEmbDtypeF32) {
    throw FormatError(8, "EMB1: unsupported dtype code " + std::to_string(get_u32(head, 8)));
  }
  EmbeddingFileHeader h{get_u64(head, 12), get_u64(head, 20)};
  if (h.rows < 1) throw FormatError(12, "EMB1: rows must be >= 1");
  if (h.cols < 1) throw FormatError(20, "EMB1: cols must be >= 1");
  const std::uint64_t payload = total_size - kEmbHeaderBytes;
  if (h.cols > (~std::uint64_t{0} / 4) / h.rows) throw FormatError(12, "EMB1: shape overflows");
  const std::uint64_t expected = h.rows * h.cols * 4;
  if (payload < expected) {
    throw FormatError(total_size, "EMB1: truncated payload, expected " + std::to_string(expected) +
                                      " bytes, found " + std::to_string(payload));
  }
  if (payload > expected) {
    throw FormatError(kEmbHeaderBytes + expected,
                      "EMB1: " + std::to_string(payload - expected) + " trailing bytes");
  }
  return h;
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_embedding(const Matrix& m) {
  if (m.empty()) throw EmptyInputError("EMB1: refusing to encode an empty matrix");
  std::vector<std::uint8_t> out;
  out.reserve(kEmbHeaderBytes + 4 * m.size());
  for (char c : {'E', 'M', 'B', '1'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kEmbVersion);
  put_u32(out, kEmbDtypeF32);
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (float v : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Matrix decode_embedding(std::span<const std::uint8_t> bytes) {
  const auto h = parse_header(bytes, bytes.size());
  std::vector<float> data(h.rows * h.cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, kEmbHeaderBytes + 4 * i));
  }
  return Matrix(h.rows, h.cols, std::move(data));
}

void write_embedding_file(const std::filesystem::path& path, const Matrix& m) {
  const auto bytes = encode_embedding(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Matrix read_embedding_file(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  return decode_embedding(bytes);
}

EmbeddingFileHeader read_embedding_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string());
  std::vector<std::uint8_t> head(kEmbHeaderBytes, 0);
  in.read(reinterpret_cast<char*>(head.data()), kEmbHeaderBytes);
  return parse_header(head, size);
}

Matrix pool_mean(const Matrix& frames) {
  if (frames.rows() == 0) throw EmptyInputError("pool_mean: no frames");
  std::vector<double> acc(frames.cols(), 0.0);
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    const auto r = frames.row(t);
    for (std::size_t j = 0; j < r.size(); ++j) acc[j] += r[j];
  }
  Matrix out(1, frames.cols());
  for (std::size_t j = 0; j < acc.size(); ++j) {
    out[j] = static_cast<float>(acc[j] / static_cast<double>(frames.rows()));
  }
  return out;
}

Matrix pool_first(const Matrix& frames) {
  if (frames.rows() == 0) throw EmptyInputError("pool_first: no frames");
  const auto r = frames.row(0);
  return Matrix(1, frames.cols(), std::vector<float>(r.begin(), r.end()));
}

Dataset make_dataset(std::vector<ManifestEntry> entries, std::filesystem::path root) {
  Dataset d;
  std::set<std::string> words;
  std::set<std::string> speakers;
  for (const auto& e : entries) {
    words.insert(e.target_word);
    speakers.insert(e.speaker_id);
  }
  d.entries = std::move(entries);
  d.vocabulary.assign(words.begin(), words.end());
  d.speakers.assign(speakers.begin(), speakers.end());
  d.root = std::move(root);
  return d;
}

namespace {

const std::set<std::string>& manifest_fields() {
  static const std::set<std::string> fields{"recording_id", "speaker_id", "target_word",
                                            "correct",      "embedding_path", "frames",
                                            "dim"};
  return fields;
}

ManifestEntry parse_entry(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw LoadError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!manifest_fields().contains(key)) throw LoadError(where + ": unknown field '" + key + "'");
  }
  for (const auto& key : manifest_fields()) {
    if (!j.contains(key)) throw LoadError(where + ": missing field '" + key + "'");
  }
  ManifestEntry e;
  try {
    e.recording_id = j.at("recording_id").get<std::string>();
    e.speaker_id = j.at("speaker_id").get<std::string>();
    e.target_word = j.at("target_word").get<std::string>();
    e.correct = j.at("correct").get<bool>();
    e.embedding_path = j.at("embedding_path").get<std::string>();
    e.frames = j.at("frames").get<std::size_t>();
    e.dim = j.at("dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw LoadError(where + ": " + ex.what());
  }
  if (e.recording_id.empty()) throw LoadError(where + ": empty recording_id");
  if (e.speaker_id.empty()) throw LoadError(where + ": empty speaker_id");
  if (e.target_word.empty()) throw LoadError(where + ": empty target_word");
  if (std::any_of(e.target_word.begin(), e.target_word.end(),
                  [](char c) { return c >= 'A' && c <= 'Z'; })) {
    throw LoadError(where + ": target_word '" + e.target_word + "' is not lowercase");
  }
  return e;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  const auto root = manifest_path.parent_path();
  std::vector<ManifestEntry> entries;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest_path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
      throw LoadError(where + ": " + ex.what());
    }
    auto e = parse_entry(j, where);
    if (!seen.insert(e.recording_id).second) {
      throw LoadError(where + ": duplicate recording_id '" + e.recording_id + "'");
    }
    const auto file = root / e.embedding_path;
    if (!std::filesystem::exists(file)) {
      throw LoadError(where + ": missing embedding file " + file.string());
    }
    EmbeddingFileHeader h;
    try {
      h = read_embedding_header(file);
    } catch (const Error& ex) {
      throw LoadError(where + ": " + ex.what());
    }
    if (h.rows != e.frames || h.cols != e.dim) {
      throw LoadError(where + ": declared shape " + std::to_string(e.frames) + "x" +
                      std::to_string(e.dim) + " but " + file.string() + " holds " +
                      std::to_string(h.rows) + "x" + std::to_string(h.cols));
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw LoadError(manifest_path.string() + ": no entries");
  return make_dataset(std::move(entries), root);
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["recording_id"] = e.recording_id;
    j["speaker_id"] = e.speaker_id;
    j["target_word"] = e.target_word;
    j["correct"] = e.correct;
    j["embedding_path"] = e.embedding_path;
    j["frames"] = e.frames;
    j["dim"] = e.dim;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<FoldSpec> loso_folds(const Dataset& d, std::uint64_t seed) {
  if (d.speakers.size() < 3) {
    throw InsufficientSpeakersError("leave-one-speaker-out needs at least 3 speakers, got " +
                                    std::to_string(d.speakers.size()));
  }
  std::vector<FoldSpec> folds;
  folds.reserve(d.speakers.size());
  for (std::size_t i = 0; i < d.speakers.size(); ++i) {
    FoldSpec f;
    f.seed = derive_seed(seed, i);
    f.test_speaker = d.speakers[i];
    std::vector<std::string> others;
    for (const auto& s : d.speakers)
      if (s != f.test_speaker) others.push_back(s);
    Rng rng(f.seed);
    const auto pick = rng.below(others.size());
    f.val_speaker = others[pick];
    others.erase(others.begin() + static_cast<std::ptrdiff_t>(pick));
    f.train_speakers = std::move(others);
    folds.push_back(std::move(f));
  }
  return folds;
}

}  // namespace namegate
