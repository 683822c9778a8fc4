#pragma once

#include <cstdint>
#include <vector>

#include "namegate/matrix.hpp"
#include "namegate/prompts.hpp"
#include "namegate/tape.hpp"

namespace namegate {

inline constexpr double kInitTemperature = 0.07;
inline constexpr std::size_t kDefaultSharedDim = 256;

// Contrastive head: one linear projection per modality into a shared space
// plus two learnable log logit scales (tau = exp(s), so tau > 0 always).
template <typename T>
struct MatcherParams {
  Param<T> audio_weight;     // d_audio x d
  Param<T> audio_bias;       // 1 x d
  Param<T> text_weight;      // d_text x d
  Param<T> text_bias;        // 1 x d
  Param<T> audio_log_scale;  // 1 x 1
  Param<T> text_log_scale;   // 1 x 1

  std::size_t audio_dim() const noexcept { return audio_weight.value.rows(); }
  std::size_t text_dim() const noexcept { return text_weight.value.rows(); }
  std::size_t shared_dim() const noexcept { return audio_weight.value.cols(); }

  std::vector<Param<T>*> all() {
    return {&audio_weight, &audio_bias, &text_weight, &text_bias, &audio_log_scale, &text_log_scale};
  }

  template <typename U>
  MatcherParams<U> cast() const;
};

// Weights uniform in +-1/sqrt(fan_in), biases zero, both log scales at
// ln(1/0.07).
template <typename T>
MatcherParams<T> init_matcher(std::size_t audio_dim, std::size_t text_dim, std::size_t shared_dim,
                              std::uint64_t seed);

// l2_normalize_rows(pooled * W + b), row-wise for any number of rows.
template <typename T>
BasicMatrix<T> embed_audio(const MatcherParams<T>& p, const BasicMatrix<T>& pooled);
template <typename T>
BasicMatrix<T> embed_text(const MatcherParams<T>& p, const BasicMatrix<T>& pooled);

template <typename T>
struct PairLogits {
  BasicMatrix<T> audio_to_text;  // exp(s_a) * A * T^T
  BasicMatrix<T> text_to_audio;  // exp(s_t) * T * A^T
};

template <typename T>
PairLogits<T> pair_logits(const MatcherParams<T>& p, const BasicMatrix<T>& audio,
                          const BasicMatrix<T>& text);

// Mean of the two identity-label cross-entropies.
template <typename T>
T contrastive_loss(const BasicMatrix<T>& audio_to_text, const BasicMatrix<T>& text_to_audio);

// Records the full forward pass (projection, normalization, logits,
// symmetric loss) on `tape` and returns the 1x1 loss node.
template <typename T>
Var record_matcher_loss(Tape<T>& tape, MatcherParams<T>& p, const BasicMatrix<T>& audio_pooled,
                        const BasicMatrix<T>& text_pooled);

template <typename T>
struct Candidate {
  PromptLabel label;
  BasicMatrix<T> embedding;  // 1 x d
};

template <typename T>
struct CandidateScores {
  std::vector<T> scores;  // cosine similarity per candidate
  std::size_t best = 0;   // first maximum
  PromptLabel predicted = PromptLabel::mispronounced();
};

template <typename T>
CandidateScores<T> score_candidates(const BasicMatrix<T>& audio_embedding,
                                    const std::vector<Candidate<T>>& candidates);

}  // namespace namegate
