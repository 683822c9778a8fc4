#include "namegate/matcher.hpp"

#include <cmath>
#include <numeric>

#include "namegate/ops.hpp"
#include "namegate/rng.hpp"

namespace namegate {
namespace {

constexpr double kUnitTolerance = 1e-5;

template <typename T>
BasicMatrix<T> uniform_init(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  BasicMatrix<T> m(rows, cols);
  for (T& v : m.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return m;
}

template <typename T>
void require_unit_rows(const BasicMatrix<T>& m, const char* what) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double sq = 0.0;
    for (T v : m.row(i)) sq += static_cast<double>(v) * static_cast<double>(v);
    if (std::abs(std::sqrt(sq) - 1.0) > kUnitTolerance) {
      throw Error(std::string("pair_logits: ") + what + " row " + std::to_string(i) +
                  " is not unit norm");
    }
  }
}

template <typename T, typename U>
Param<U> cast_param(const Param<T>& p) {
  Param<U> out(p.name, p.value.template cast<U>());
  out.grad = p.grad.template cast<U>();
  out.decay = p.decay;
  return out;
}

}  // namespace

template <typename T>
template <typename U>
MatcherParams<U> MatcherParams<T>::cast() const {
  return MatcherParams<U>{cast_param<T, U>(audio_weight),    cast_param<T, U>(audio_bias),
                          cast_param<T, U>(text_weight),     cast_param<T, U>(text_bias),
                          cast_param<T, U>(audio_log_scale), cast_param<T, U>(text_log_scale)};
}

template <typename T>
MatcherParams<T> init_matcher(std::size_t audio_dim, std::size_t text_dim, std::size_t shared_dim,
                              std::uint64_t seed) {
  if (audio_dim < 1 || text_dim < 1 || shared_dim < 1) {
    throw ConfigError("init_matcher: dimensions must be >= 1");
  }
  Rng rng(seed);
  const T log_scale = static_cast<T>(std::log(1.0 / kInitTemperature));
  MatcherParams<T> p;
  p.audio_weight = Param<T>("W_a", uniform_init<T>(audio_dim, shared_dim, rng));
  p.audio_bias = Param<T>("b_a", BasicMatrix<T>(1, shared_dim));
  p.text_weight = Param<T>("W_t", uniform_init<T>(text_dim, shared_dim, rng));
  p.text_bias = Param<T>("b_t", BasicMatrix<T>(1, shared_dim));
  p.audio_log_scale = Param<T>("s_a", BasicMatrix<T>::scalar(log_scale));
  p.text_log_scale = Param<T>("s_t", BasicMatrix<T>::scalar(log_scale));
  return p;
}

template <typename T>
BasicMatrix<T> embed_audio(const MatcherParams<T>& p, const BasicMatrix<T>& pooled) {
  return l2_normalize_rows(add_bias(matmul(pooled, p.audio_weight.value), p.audio_bias.value));
}

template <typename T>
BasicMatrix<T> embed_text(const MatcherParams<T>& p, const BasicMatrix<T>& pooled) {
  return l2_normalize_rows(add_bias(matmul(pooled, p.text_weight.value), p.text_bias.value));
}

template <typename T>
PairLogits<T> pair_logits(const MatcherParams<T>& p, const BasicMatrix<T>& audio,
                          const BasicMatrix<T>& text) {
  if (!audio.same_shape(text)) {
    throw ShapeError("pair_logits: audio " + audio.shape_string() + " vs text " +
                     text.shape_string());
  }
  require_unit_rows(audio, "audio");
  require_unit_rows(text, "text");
  const T tau_a = std::exp(p.audio_log_scale.value[0]);
  const T tau_t = std::exp(p.text_log_scale.value[0]);
  return {scaled(matmul_nt(audio, text), tau_a), scaled(matmul_nt(text, audio), tau_t)};
}

template <typename T>
T contrastive_loss(const BasicMatrix<T>& audio_to_text, const BasicMatrix<T>& text_to_audio) {
  const std::size_t n = audio_to_text.rows();
  if (n == 0 || audio_to_text.cols() != n || !text_to_audio.same_shape(audio_to_text)) {
    throw ShapeError("contrastive_loss: need two equal NxN matrices, got " +
                     audio_to_text.shape_string() + " and " + text_to_audio.shape_string());
  }
  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  return T{0.5} * (cross_entropy_mean(audio_to_text, std::span<const std::size_t>(identity)) +
                   cross_entropy_mean(text_to_audio, std::span<const std::size_t>(identity)));
}

template <typename T>
Var record_matcher_loss(Tape<T>& tape, MatcherParams<T>& p, const BasicMatrix<T>& audio_pooled,
                        const BasicMatrix<T>& text_pooled) {
  const std::size_t n = audio_pooled.rows();
  if (n == 0 || text_pooled.rows() != n) {
    throw ShapeError("matcher loss: audio batch " + audio_pooled.shape_string() +
                     " vs text batch " + text_pooled.shape_string());
  }
  const Var wa = tape.leaf(p.audio_weight);
  const Var ba = tape.leaf(p.audio_bias);
  const Var wt = tape.leaf(p.text_weight);
  const Var bt = tape.leaf(p.text_bias);
  const Var sa = tape.leaf(p.audio_log_scale);
  const Var st = tape.leaf(p.text_log_scale);

  const Var audio = tape.l2_normalize_rows(tape.add_bias(tape.matmul(tape.constant(audio_pooled), wa), ba));
  const Var text = tape.l2_normalize_rows(tape.add_bias(tape.matmul(tape.constant(text_pooled), wt), bt));
  const Var audio_to_text = tape.scale_exp(tape.matmul_nt(audio, text), sa);
  const Var text_to_audio = tape.scale_exp(tape.matmul_nt(text, audio), st);

  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  const Var ce_at = tape.softmax_cross_entropy(audio_to_text, identity);
  const Var ce_ta = tape.softmax_cross_entropy(text_to_audio, identity);
  return tape.scale(tape.add(ce_at, ce_ta), T{0.5});
}

template <typename T>
CandidateScores<T> score_candidates(const BasicMatrix<T>& audio_embedding,
                                    const std::vector<Candidate<T>>& candidates) {
  if (candidates.empty()) throw EmptyInputError("score_candidates: no candidates");
  if (audio_embedding.rows() != 1) {
    throw ShapeError("score_candidates: expected one audio row, got " +
                     audio_embedding.shape_string());
  }
  const auto a = audio_embedding.row(0);
  double a_sq = 0.0;
  for (T v : a) a_sq += static_cast<double>(v) * v;
  CandidateScores<T> out;
  out.scores.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (c.embedding.rows() != 1 || c.embedding.cols() != a.size()) {
      throw ShapeError("score_candidates: candidate " + c.label.name() + " has shape " +
                       c.embedding.shape_string());
    }
    double dot = 0.0;
    double c_sq = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      dot += static_cast<double>(a[j]) * c.embedding[j];
      c_sq += static_cast<double>(c.embedding[j]) * c.embedding[j];
    }
    const double denom = std::sqrt(a_sq) * std::sqrt(c_sq);
    out.scores.push_back(static_cast<T>(denom > 0.0 ? dot / denom : 0.0));
  }
  for (std::size_t i = 1; i < out.scores.size(); ++i)
    if (out.scores[i] > out.scores[out.best]) out.best = i;
  out.predicted = candidates[out.best].label;
  return out;
}

#define NAMEGATE_INSTANTIATE_MATCHER(T)                                                        \
  template struct MatcherParams<T>;                                                            \
  template MatcherParams<T> init_matcher<T>(std::size_t, std::size_t, std::size_t, std::uint64_t); \
  template BasicMatrix<T> embed_audio(const MatcherParams<T>&, const BasicMatrix<T>&);         \
  template BasicMatrix<T> embed_text(const MatcherParams<T>&, const BasicMatrix<T>&);          \
  template PairLogits<T> pair_logits(const MatcherParams<T>&, const BasicMatrix<T>&,           \
                                     const BasicMatrix<T>&);                                   \
  template T contrastive_loss(const BasicMatrix<T>&, const BasicMatrix<T>&);                   \
  template Var record_matcher_loss(Tape<T>&, MatcherParams<T>&, const BasicMatrix<T>&,         \
                                   const BasicMatrix<T>&);                                     \
  template CandidateScores<T> score_candidates(const BasicMatrix<T>&,                          \
                                               const std::vector<Candidate<T>>&);

NAMEGATE_INSTANTIATE_MATCHER(float)
NAMEGATE_INSTANTIATE_MATCHER(double)

template MatcherParams<double> MatcherParams<float>::cast<double>() const;
template MatcherParams<float> MatcherParams<double>::cast<float>() const;

#undef NAMEGATE_INSTANTIATE_MATCHER

}  // namespace namegate
