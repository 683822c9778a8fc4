#include <cmath>

#include "doctest.h"
#include "namegate/dataio.hpp"
#include "namegate/errors.hpp"
#include "namegate/prompts.hpp"
#include "test_util.hpp"

using namespace namegate;
using testutil::TempDir;

TEST_CASE("prompt rendering") {
  const PromptTemplate t;
  CHECK(render_prompt(PromptLabel::word("pomme"), t) == "Correct pronunciation of the word pomme");
  CHECK(render_prompt(PromptLabel::mispronounced(), t) == "Mispronounced word");
  PromptTemplate custom;
  custom.positive_template = "dire {word}";
  CHECK(render_prompt(PromptLabel::word("chat"), custom) == "dire chat");
  custom.positive_template = "no placeholder";
  CHECK_THROWS_AS(custom.validate(), ConfigError);
  custom.positive_template = "{word} {word}";
  CHECK_THROWS_AS(custom.validate(), ConfigError);
}

TEST_CASE("labels follow the correctness flag") {
  ManifestEntry e;
  e.target_word = "pomme";
  e.correct = true;
  CHECK(label_of(e) == PromptLabel::word("pomme"));
  e.correct = false;
  CHECK(label_of(e) == PromptLabel::mispronounced());
  CHECK(label_of(e).name() == "mispronounced");
}

TEST_CASE("label space orders vocabulary then mispronounced") {
  const LabelSpace ls({"chat", "pomme"});
  CHECK(ls.class_count() == 3);
  CHECK(ls.index_of(PromptLabel::word("chat")) == 0);
  CHECK(ls.index_of(PromptLabel::word("pomme")) == 1);
  CHECK(ls.index_of(PromptLabel::mispronounced()) == 2);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ls.index_of(ls.label_at(i)) == i);
  CHECK(ls.parse("mispronounced") == PromptLabel::mispronounced());
  CHECK_THROWS_AS(ls.index_of(PromptLabel::word("chien")), IndexError);
  CHECK_THROWS_AS(ls.label_at(3), IndexError);
  CHECK_THROWS_AS(LabelSpace({"pomme", "chat"}), ConfigError);
  CHECK_THROWS_AS(LabelSpace({"mispronounced"}), ConfigError);
}

TEST_CASE("synthetic provider is deterministic and spread out") {
  const SyntheticTextProvider p(64, 5);
  const auto a = p.embed("Correct pronunciation of the word pomme");
  CHECK(a == p.embed("Correct pronunciation of the word pomme"));
  CHECK(a == SyntheticTextProvider(64, 5).embed("Correct pronunciation of the word pomme"));
  CHECK_FALSE(a == SyntheticTextProvider(64, 6).embed("Correct pronunciation of the word pomme"));

  std::vector<Matrix> v;
  for (int i = 0; i < 100; ++i) {
    v.push_back(p.embed("word " + std::to_string(i)));
    double sq = 0.0;
    for (float x : v.back().values()) sq += double(x) * x;
    CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-6);
  }
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    double dot = 0.0;
    for (std::size_t k = 0; k < 64; ++k) dot += double(v[i][k]) * v[i + 1][k];
    CHECK(std::abs(dot) < 0.5);
  }
  CHECK_THROWS_AS(SyntheticTextProvider(0, 1), ConfigError);
}

TEST_CASE("file-backed provider") {
  TempDir dir("prompts");
  Rng rng(3);
  const auto vec = testutil::random_matrix<float>(1, 768, rng);
  write_embedding_file(dir / "p0.emb", vec);
  write_prompt_manifest(dir / "prompts.jsonl", {{"Correct pronunciation of the word pomme", "p0.emb"}});

  const FileBackedTextProvider p(dir / "prompts.jsonl");
  CHECK(p.dim() == 768);
  CHECK(p.embed("Correct pronunciation of the word pomme") == vec);
  CHECK_THROWS_AS(p.embed("Correct pronunciation of the word chat"), UnknownPromptError);

  const auto via_config =
      make_provider({{"mode", "file_backed"}, {"manifest", "prompts.jsonl"}}, dir.path());
  CHECK(via_config->embed("Correct pronunciation of the word pomme") == vec);
  CHECK(make_provider({{"mode", "synthetic"}, {"dim", 16}, {"seed", 1}}, ".")->dim() == 16);
  CHECK_THROWS_AS(make_provider({{"mode", "synthetic"}, {"dim", 16}, {"colour", 1}}, "."), ConfigError);
  CHECK_THROWS_AS(make_provider({{"mode", "magic"}}, "."), ConfigError);
  CHECK_THROWS_AS(FileBackedTextProvider(dir / "absent.jsonl"), IoError);
}
