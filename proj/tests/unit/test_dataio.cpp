#include <algorithm>
#include <cstring>
#include <set>

#include "doctest.h"
#include "namegate/dataio.hpp"
#include "namegate/errors.hpp"
#include "test_util.hpp"

using namespace namegate;
using testutil::TempDir;

namespace {

std::vector<std::uint8_t> header(const char* magic, std::uint32_t version, std::uint32_t dtype,
                                 std::uint64_t rows, std::uint64_t cols) {
  std::vector<std::uint8_t> b(kEmbHeaderBytes);
  std::memcpy(b.data(), magic, 4);
  for (int i = 0; i < 4; ++i) b[4 + i] = static_cast<std::uint8_t>(version >> (8 * i));
  for (int i = 0; i < 4; ++i) b[8 + i] = static_cast<std::uint8_t>(dtype >> (8 * i));
  for (int i = 0; i < 8; ++i) b[12 + i] = static_cast<std::uint8_t>(rows >> (8 * i));
  for (int i = 0; i < 8; ++i) b[20 + i] = static_cast<std::uint8_t>(cols >> (8 * i));
  return b;
}

std::string entry_line(const std::string& id, const std::string& spk, const std::string& word, bool ok,
                       const std::string& path, std::size_t frames, std::size_t dim) {
  return "{\"recording_id\":\"" + id + "\",\"speaker_id\":\"" + spk + "\",\"target_word\":\"" + word +
         "\",\"correct\":" + (ok ? "true" : "false") + ",\"embedding_path\":\"" + path +
         "\",\"frames\":" + std::to_string(frames) + ",\"dim\":" + std::to_string(dim) + "}\n";
}

}  // namespace

TEST_CASE("EMB1 round trip is bitwise") {
  Rng rng(1);
  const auto m = testutil::random_matrix<float>(3, 5, rng);
  const auto bytes = encode_embedding(m);
  CHECK(bytes.size() == kEmbHeaderBytes + 3 * 5 * 4);
  const auto back = decode_embedding(bytes);
  CHECK(std::memcmp(back.data().data(), m.data().data(), 15 * sizeof(float)) == 0);

  TempDir dir("emb");
  write_embedding_file(dir / "m.emb", m);
  CHECK(read_embedding_file(dir / "m.emb") == m);
  const auto h = read_embedding_header(dir / "m.emb");
  CHECK(h.rows == 3);
  CHECK(h.cols == 5);
}

TEST_CASE("EMB1 format errors carry offsets") {
  auto bad_magic = header("XXXX", 1, 1, 1, 1);
  bad_magic.resize(bad_magic.size() + 4);
  try {
    decode_embedding(bad_magic);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }

  auto bad_version = header("EMB1", 2, 1, 1, 1);
  bad_version.resize(bad_version.size() + 4);
  try {
    decode_embedding(bad_version);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 4);
  }

  auto bad_dtype = header("EMB1", 1, 2, 1, 1);
  bad_dtype.resize(bad_dtype.size() + 4);
  CHECK_THROWS_AS(decode_embedding(bad_dtype), FormatError);

  auto truncated = header("EMB1", 1, 1, 2, 3);
  truncated.resize(truncated.size() + 20);
  try {
    decode_embedding(truncated);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected 24") != std::string::npos);
    CHECK(msg.find("found 20") != std::string::npos);
  }

  auto trailing = header("EMB1", 1, 1, 1, 1);
  trailing.resize(trailing.size() + 8);
  CHECK_THROWS_AS(decode_embedding(trailing), FormatError);

  auto empty = header("EMB1", 1, 1, 0, 3);
  CHECK_THROWS_AS(decode_embedding(empty), FormatError);
  CHECK_THROWS_AS(decode_embedding(std::vector<std::uint8_t>(10)), FormatError);
}

TEST_CASE("pooling") {
  const auto m = Matrix::from_rows({{1, 3}, {3, 5}});
  CHECK(pool_mean(m) == Matrix::from_rows({{2, 4}}));
  CHECK(pool_first(Matrix::from_rows({{7, 8}, {9, 10}})) == Matrix::from_rows({{7, 8}}));
  const auto one = Matrix::from_rows({{1.5f, -2.0f}});
  CHECK(pool_mean(one) == one);
  CHECK(pool_first(one) == one);
  CHECK_THROWS_AS(pool_mean(Matrix(0, 3)), EmptyInputError);
  CHECK_THROWS_AS(pool_first(Matrix(0, 3)), EmptyInputError);

  Rng rng(2);
  const auto frames = testutil::random_matrix<float>(100, 6, rng);
  const auto mean = pool_mean(frames);
  for (std::size_t c = 0; c < 6; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < 100; ++r) s += frames(r, c);
    s /= 100.0;
    CHECK(std::abs(mean(0, c) - s) <= 1e-5 * std::max(1.0, std::abs(s)));
  }
  CHECK(pool_first(frames) == Matrix(1, 6, std::vector<float>(frames.row(0).begin(), frames.row(0).end())));

  std::vector<std::size_t> order(100);
  for (std::size_t i = 0; i < 100; ++i) order[i] = i;
  rng.shuffle(order);
  Matrix permuted(100, 6);
  for (std::size_t r = 0; r < 100; ++r)
    std::copy(frames.row(order[r]).begin(), frames.row(order[r]).end(), permuted.row(r).begin());
  const auto pm = pool_mean(permuted);
  for (std::size_t c = 0; c < 6; ++c) CHECK(std::abs(pm(0, c) - mean(0, c)) < 1e-5);
}

TEST_CASE("load_dataset validation") {
  TempDir dir("manifest");
  write_embedding_file(dir / "a.emb", Matrix(4, 3, 0.5f));
  write_embedding_file(dir / "b.emb", Matrix(2, 3, 0.25f));

  testutil::spit(dir / "ok.jsonl", entry_line("r1", "s1", "pomme", true, "a.emb", 4, 3) +
                                       entry_line("r2", "s2", "chat", false, "b.emb", 2, 3));
  const auto d = load_dataset(dir / "ok.jsonl");
  CHECK(d.entries.size() == 2);
  CHECK(d.vocabulary == std::vector<std::string>{"chat", "pomme"});
  CHECK(d.speakers == std::vector<std::string>{"s1", "s2"});
  CHECK(d.load_frames(1) == Matrix(2, 3, 0.25f));

  testutil::spit(dir / "dup.jsonl", entry_line("r1", "s1", "pomme", true, "a.emb", 4, 3) +
                                        entry_line("r1", "s2", "chat", false, "b.emb", 2, 3));
  try {
    load_dataset(dir / "dup.jsonl");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("dup.jsonl:2") != std::string::npos);
  }

  write_embedding_file(dir / "wide.emb", Matrix(1, 300));
  testutil::spit(dir / "wide.jsonl", entry_line("r1", "s1", "pomme", true, "wide.emb", 1, 256));
  CHECK_THROWS_AS(load_dataset(dir / "wide.jsonl"), LoadError);

  testutil::spit(dir / "missing.jsonl", entry_line("r1", "s1", "pomme", true, "nope.emb", 1, 3));
  CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), LoadError);

  testutil::spit(dir / "extra.jsonl",
                 "{\"recording_id\":\"r1\",\"speaker_id\":\"s1\",\"target_word\":\"pomme\",\"correct\":true,"
                 "\"embedding_path\":\"a.emb\",\"frames\":4,\"dim\":3,\"layer\":12}\n");
  CHECK_THROWS_AS(load_dataset(dir / "extra.jsonl"), LoadError);

  testutil::spit(dir / "short.jsonl", "{\"recording_id\":\"r1\",\"speaker_id\":\"s1\"}\n");
  CHECK_THROWS_AS(load_dataset(dir / "short.jsonl"), LoadError);

  CHECK_THROWS_AS(load_dataset(dir / "absent.jsonl"), IoError);

  std::vector<ManifestEntry> entries = d.entries;
  write_manifest(dir / "rewritten.jsonl", entries);
  CHECK(testutil::slurp(dir / "rewritten.jsonl") == testutil::slurp(dir / "ok.jsonl"));
}

namespace {

Dataset speakers_only(std::size_t n) {
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    ManifestEntry e;
    e.recording_id = "r" + std::to_string(i);
    e.speaker_id = "spk" + std::to_string(100 + i);
    e.target_word = "mot";
    e.correct = true;
    e.embedding_path = "x.emb";
    e.frames = 1;
    e.dim = 1;
    entries.push_back(e);
  }
  return make_dataset(std::move(entries), ".");
}

}  // namespace

TEST_CASE("leave-one-speaker-out folds") {
  const auto d = speakers_only(34);
  const auto folds = loso_folds(d, 0);
  CHECK(folds.size() == 34);
  std::set<std::string> tests;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    const auto& f = folds[i];
    CHECK(f.test_speaker == d.speakers[i]);
    CHECK(f.test_speaker != f.val_speaker);
    tests.insert(f.test_speaker);
    std::set<std::string> all(f.train_speakers.begin(), f.train_speakers.end());
    CHECK(all.size() == f.train_speakers.size());
    CHECK_FALSE(all.contains(f.test_speaker));
    CHECK_FALSE(all.contains(f.val_speaker));
    all.insert(f.test_speaker);
    all.insert(f.val_speaker);
    CHECK(all == std::set<std::string>(d.speakers.begin(), d.speakers.end()));
  }
  CHECK(tests.size() == 34);

  const auto again = loso_folds(d, 0);
  for (std::size_t i = 0; i < folds.size(); ++i) {
    CHECK(again[i].val_speaker == folds[i].val_speaker);
    CHECK(again[i].seed == folds[i].seed);
  }

  const auto three = loso_folds(speakers_only(3), 0);
  CHECK(three.size() == 3);
  for (const auto& f : three) CHECK(f.train_speakers.size() == 1);

  CHECK_THROWS_AS(loso_folds(speakers_only(2), 0), InsufficientSpeakersError);
}
