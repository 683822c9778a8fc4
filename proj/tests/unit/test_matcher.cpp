#include <cmath>

#include "doctest.h"
#include "namegate/errors.hpp"
#include "namegate/matcher.hpp"
#include "namegate/ops.hpp"
#include "test_util.hpp"

using namespace namegate;

namespace {

// Symmetric loss written out with explicit loops.
double loss_oracle(const MatrixD& a2t, const MatrixD& t2a) {
  const std::size_t n = a2t.rows();
  auto ce = [n](const MatrixD& m) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = m(i, 0);
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, m(i, j));
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += std::exp(m(i, j) - mx);
      total += mx + std::log(s) - m(i, i);
    }
    return total / static_cast<double>(n);
  };
  return 0.5 * (ce(a2t) + ce(t2a));
}

}  // namespace

TEST_CASE("matcher initialization") {
  const auto p = init_matcher<float>(1024, 768, kDefaultSharedDim, 42);
  CHECK(p.audio_weight.value.rows() == 1024);
  CHECK(p.audio_weight.value.cols() == 256);
  CHECK(p.text_weight.value.rows() == 768);
  CHECK(std::exp(double(p.audio_log_scale.value[0])) == doctest::Approx(1.0 / 0.07).epsilon(1e-6));
  CHECK(std::exp(double(p.text_log_scale.value[0])) == doctest::Approx(14.2857).epsilon(1e-4));
  const double bound = 1.0 / std::sqrt(1024.0);
  for (float w : p.audio_weight.value.values()) CHECK(std::abs(w) <= bound);
  for (float b : p.audio_bias.value.values()) CHECK(b == 0.0f);
  const auto q = init_matcher<float>(1024, 768, kDefaultSharedDim, 42);
  CHECK(q.audio_weight.value == p.audio_weight.value);
  CHECK(q.text_weight.value == p.text_weight.value);
  CHECK_FALSE(init_matcher<float>(1024, 768, 256, 43).audio_weight.value == p.audio_weight.value);
  CHECK_THROWS_AS(init_matcher<float>(0, 4, 4, 1), ConfigError);
}

TEST_CASE("embeddings are unit rows of the affine projection") {
  Rng rng(4);
  auto p = init_matcher<double>(6, 5, 4, 1);
  p.audio_bias.value = testutil::random_matrix<double>(1, 4, rng);
  const auto x = testutil::random_matrix<double>(3, 6, rng);
  const auto e = embed_audio(p, x);
  const auto expect = l2_normalize_rows(add_bias(matmul(x, p.audio_weight.value), p.audio_bias.value));
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(std::abs(e[i] - expect[i]) < 1e-12);
  for (std::size_t r = 0; r < 3; ++r) {
    double sq = 0.0;
    for (double v : e.row(r)) sq += v * v;
    CHECK(std::abs(sq - 1.0) < 1e-12);
  }

  p.audio_weight.value = MatrixD(6, 4);
  p.audio_bias.value = MatrixD::from_rows({{3, 0, 4, 0}});
  const auto fixed = embed_audio(p, x);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(fixed(r, 0) == doctest::Approx(0.6));
    CHECK(fixed(r, 2) == doctest::Approx(0.8));
  }
  p.audio_bias.value = MatrixD(1, 4);
  CHECK_THROWS_AS(embed_audio(p, x), DegenerateVectorError);
}

TEST_CASE("pair logits") {
  Rng rng(5);
  auto p = init_matcher<double>(6, 5, 4, 2);
  p.audio_log_scale.value[0] = 0.3;
  p.text_log_scale.value[0] = -0.2;
  const auto a = embed_audio(p, testutil::random_matrix<double>(4, 6, rng));
  const auto t = embed_text(p, testutil::random_matrix<double>(4, 5, rng));
  const auto l = pair_logits(p, a, t);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 4; ++k) dot += a(i, k) * t(j, k);
      CHECK(l.audio_to_text(i, j) == doctest::Approx(std::exp(0.3) * dot).epsilon(1e-12));
      CHECK(l.text_to_audio(j, i) == doctest::Approx(std::exp(-0.2) * dot).epsilon(1e-12));
      CHECK(std::abs(l.audio_to_text(i, j)) <= std::exp(0.3) + 1e-12);
    }
  CHECK_THROWS_AS(pair_logits(p, a, MatrixD(3, 4, 0.5)), ShapeError);
}

TEST_CASE("contrastive loss oracles") {
  CHECK(contrastive_loss(MatrixD::from_rows({{2.5}}), MatrixD::from_rows({{-1.0}})) == 0.0);
  const auto two = MatrixD::from_rows({{1, 0}, {0, 1}});
  CHECK(contrastive_loss(two, two) == doctest::Approx(0.31326168751822286).epsilon(1e-15));

  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const auto a2t = testutil::random_matrix<double>(n, n, rng, 3.0);
    const auto t2a = testutil::random_matrix<double>(n, n, rng, 3.0);
    const double l = contrastive_loss(a2t, t2a);
    CHECK(std::abs(l - loss_oracle(a2t, t2a)) < 1e-9);
    CHECK(std::abs(l - contrastive_loss(t2a, a2t)) < 1e-9);
    CHECK(l >= 0.0);

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    MatrixD pa(n, n), pt(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        pa(i, j) = a2t(perm[i], perm[j]);
        pt(i, j) = t2a(perm[i], perm[j]);
      }
    CHECK(std::abs(contrastive_loss(pa, pt) - l) < 1e-9);
  }
  CHECK_THROWS_AS(contrastive_loss(MatrixD(2, 3), MatrixD(2, 3)), ShapeError);
}

TEST_CASE("candidate scoring picks the first maximum") {
  std::vector<Candidate<double>> c;
  c.push_back({PromptLabel::word("chat"), MatrixD::from_rows({{1, 0}})});
  c.push_back({PromptLabel::word("pomme"), MatrixD::from_rows({{0, 1}})});
  c.push_back({PromptLabel::mispronounced(), MatrixD::from_rows({{0, 1}})});
  const auto s = score_candidates(MatrixD::from_rows({{0.6, 0.8}}), c);
  CHECK(s.scores.size() == 3);
  CHECK(s.scores[0] == doctest::Approx(0.6));
  CHECK(s.best == 1);
  CHECK(s.predicted == PromptLabel::word("pomme"));
  CHECK(score_candidates(MatrixD::from_rows({{1, 0}}), c).predicted == PromptLabel::word("chat"));
  CHECK_THROWS_AS(score_candidates(MatrixD::from_rows({{1, 0}}), {}), EmptyInputError);
  CHECK_THROWS_AS(score_candidates(MatrixD(2, 2, 0.5), c), ShapeError);
}
