#include <cmath>

#include "doctest.h"
#include "namegate/baselines.hpp"
#include "namegate/ctc.hpp"
#include "namegate/errors.hpp"
#include "namegate/ops.hpp"
#include "test_util.hpp"

using namespace namegate;

TEST_CASE("mlp training forward matches a hand-written composition") {
  Rng rng(1);
  auto p = init_mlp<double>(5, 4, 6, 3);
  p.hidden_bias.value = testutil::random_matrix<double>(1, 6, rng);
  p.gamma.value = testutil::random_matrix<double>(1, 6, rng);
  p.beta.value = testutil::random_matrix<double>(1, 6, rng);
  const auto x = testutil::random_matrix<double>(8, 5, rng);
  auto q = p;
  const auto trace = mlp_forward_trace(q, x, true);

  const auto lin = add_bias(matmul(x, p.hidden_weight.value), p.hidden_bias.value);
  MatrixD act(8, 6);
  std::vector<double> mean(6), var(6);
  for (std::size_t j = 0; j < 6; ++j) {
    for (std::size_t i = 0; i < 8; ++i) mean[j] += lin(i, j) / 8.0;
    for (std::size_t i = 0; i < 8; ++i) var[j] += (lin(i, j) - mean[j]) * (lin(i, j) - mean[j]) / 8.0;
    for (std::size_t i = 0; i < 8; ++i) {
      const double bn = p.gamma.value[j] * (lin(i, j) - mean[j]) / std::sqrt(var[j] + 1e-5) + p.beta.value[j];
      CHECK(std::abs(trace.normalized(i, j) - bn) < 1e-12);
      act(i, j) = std::max(0.0, bn);
    }
  }
  const auto logits = add_bias(matmul(act, p.output_weight.value), p.output_bias.value);
  for (std::size_t i = 0; i < logits.size(); ++i) CHECK(std::abs(trace.logits[i] - logits[i]) < 1e-12);

  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(q.running_mean[j] == doctest::Approx(0.1 * mean[j]).epsilon(1e-12));
    CHECK(q.running_var[j] == doctest::Approx(0.9 + 0.1 * var[j] * 8.0 / 7.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(mlp_forward(q, testutil::random_matrix<double>(1, 5, rng), true), ShapeError);
}

TEST_CASE("mlp eval mode uses running statistics and leaves them alone") {
  Rng rng(2);
  auto p = init_mlp<double>(4, 3, 5, 1);
  for (int i = 0; i < 5; ++i) mlp_forward(p, testutil::random_matrix<double>(6, 4, rng), true);
  const auto mean = p.running_mean;
  const auto var = p.running_var;
  const auto x = testutil::random_matrix<double>(1, 4, rng);
  const auto a = mlp_forward_eval(p, x);
  const auto b = mlp_forward(p, x, false);
  CHECK(a == b);
  CHECK(p.running_mean == mean);
  CHECK(p.running_var == var);
  for (double v : p.running_var.values()) CHECK(v > 0.0);
}

TEST_CASE("classification ties go to the lowest class") {
  const LabelSpace labels({"chat", "pomme"});
  const std::vector<float> tie{1.0f, 3.0f, 3.0f};
  CHECK(label_from_logits(tie, labels) == PromptLabel::word("pomme"));
  const std::vector<float> last{0.0f, 0.0f, 1.0f};
  CHECK(label_from_logits(last, labels) == PromptLabel::mispronounced());
  const std::vector<float> flat{2.0f, 2.0f, 2.0f};
  CHECK(label_from_logits(flat, labels) == PromptLabel::word("chat"));
}

TEST_CASE("word error rate") {
  using V = std::vector<std::string>;
  CHECK(wer(V{"a", "b", "c"}, V{"a", "b", "c"}) == 0.0);
  CHECK(wer(V{"a", "b", "c"}, V{"a", "x", "c"}) == doctest::Approx(1.0 / 3.0));
  CHECK(wer(V{"a"}, V{"a", "b", "c"}) == 2.0);
  CHECK(wer(V{"a", "b"}, V{}) == 1.0);
  CHECK(edit_distance(V{"kitten"}, V{"sitting"}) == 1);
  CHECK(edit_distance(V{"a", "b", "c", "d"}, V{"b", "c", "d", "e"}) == 2);

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    V a(rng.below(6)), b(rng.below(6));
    for (auto& w : a) w = std::string(1, char('a' + rng.below(3)));
    for (auto& w : b) w = std::string(1, char('a' + rng.below(3)));
    CHECK(edit_distance(a, b) == edit_distance(b, a));
    CHECK(edit_distance(a, b) <= std::max(a.size(), b.size()));
    CHECK(edit_distance(a, a) == 0);
  }
}

TEST_CASE("asr decision by whole tokens") {
  CHECK(asr_decide("la pomme", "pomme") == PromptLabel::word("pomme"));
  CHECK(asr_decide("Pomme !", "pomme") == PromptLabel::word("pomme"));
  CHECK(asr_decide("pommette", "pomme") == PromptLabel::mispronounced());
  CHECK(asr_decide("", "pomme") == PromptLabel::mispronounced());
  CHECK(asr_decide("pomme de terre", "pomme de") == PromptLabel::word("pomme de"));
  AsrDecisionOptions raw;
  raw.raw_substring = true;
  CHECK(asr_decide("pommette", "pomme", raw) == PromptLabel::word("pomme"));
  CHECK(asr_decide("le café", "cafe") == PromptLabel::word("cafe"));
  AsrDecisionOptions accents;
  accents.keep_accents = true;
  CHECK(asr_decide("le cafe", "café", accents) == PromptLabel::mispronounced());
  CHECK(asr_decide("le café", "café", accents) == PromptLabel::word("café"));
}

TEST_CASE("text normalization and alphabets") {
  CHECK(normalize_text("  Élève   À\tl'école ") == "eleve a l'ecole");
  CHECK(normalize_text("Élève", true) == "élève");
  CHECK(normalize_text("a,b") == "ab");
  CHECK(tokenize("a  b c") == std::vector<std::string>{"a", "b", "c"});

  const auto folded = Alphabet::folded();
  CHECK(folded.size() == 30);
  CHECK(folded.encode("a") == std::vector<int>{1});
  const std::string text = "aujourd'hui peut-etre";
  const auto ids = folded.encode(text);
  CHECK(folded.decode(ids) == text);
  for (int id : ids) CHECK(id != kCtcBlank);
  CHECK_THROWS_AS(folded.encode("é"), IndexError);

  const auto accented = Alphabet::accented();
  CHECK(accented.size() > folded.size());
  CHECK(accented.decode(accented.encode("élève")) == "élève");
}

TEST_CASE("ctc head and decoding") {
  Rng rng(4);
  const auto p = init_ctc<double>(6, 30, 1);
  const auto frames = testutil::random_matrix<double>(9, 6, rng);
  const auto logits = ctc_logits(p, frames);
  CHECK(logits.rows() == 9);
  CHECK(logits.cols() == 30);
  const auto alphabet = Alphabet::folded();
  CHECK(transcribe(p, alphabet, frames) == ctc_greedy_decode(log_softmax_rows(logits), alphabet));
}
