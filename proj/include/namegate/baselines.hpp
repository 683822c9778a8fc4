#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "namegate/matrix.hpp"
#include "namegate/prompts.hpp"
#include "namegate/tape.hpp"

namespace namegate {

// ---------------------------------------------------------------------------
// Classification baseline: linear -> batchnorm -> ReLU -> linear.

inline constexpr std::size_t kDefaultMlpHidden = 256;

template <typename T>
struct MlpParams {
  Param<T> hidden_weight;  // d_in x H
  Param<T> hidden_bias;    // 1 x H
  Param<T> gamma;          // 1 x H
  Param<T> beta;           // 1 x H
  Param<T> output_weight;  // H x C
  Param<T> output_bias;    // 1 x C
  BasicMatrix<T> running_mean;  // 1 x H
  BasicMatrix<T> running_var;   // 1 x H, entries > 0
  double momentum = 0.1;
  double eps = 1e-5;

  std::size_t input_dim() const noexcept { return hidden_weight.value.rows(); }
  std::size_t hidden_dim() const noexcept { return hidden_weight.value.cols(); }
  std::size_t class_count() const noexcept { return output_weight.value.cols(); }

  std::vector<Param<T>*> all() {
    return {&hidden_weight, &hidden_bias, &gamma, &beta, &output_weight, &output_bias};
  }
};

template <typename T>
MlpParams<T> init_mlp(std::size_t input_dim, std::size_t classes, std::size_t hidden,
                      std::uint64_t seed);

// Every intermediate of one forward pass.
template <typename T>
struct MlpTrace {
  BasicMatrix<T> linear;      // pooled * W1 + b1
  BasicMatrix<T> normalized;  // batchnorm output (pre-ReLU)
  BasicMatrix<T> activated;   // ReLU output
  BasicMatrix<T> logits;
};

// Training mode normalizes with batch statistics (needs >= 2 rows) and
// folds them into the running estimates; eval mode uses the running
// estimates and leaves `p` untouched.
template <typename T>
MlpTrace<T> mlp_forward_trace(MlpParams<T>& p, const BasicMatrix<T>& pooled, bool training);

template <typename T>
BasicMatrix<T> mlp_forward(MlpParams<T>& p, const BasicMatrix<T>& pooled, bool training);

template <typename T>
BasicMatrix<T> mlp_forward_eval(const MlpParams<T>& p, const BasicMatrix<T>& pooled);

// Training-mode forward on the tape with mean cross-entropy against
// `labels`. Updates running statistics when `update_running` is set.
template <typename T>
Var record_mlp_loss(Tape<T>& tape, MlpParams<T>& p, const BasicMatrix<T>& pooled,
                    const std::vector<std::size_t>& labels, bool update_running = true);

// Argmax over the classes of a 1-row input (eval mode); ties go to the
// lowest class index.
template <typename T>
PromptLabel classify(const MlpParams<T>& p, const BasicMatrix<T>& pooled, const LabelSpace& labels);

PromptLabel label_from_logits(std::span<const float> logits, const LabelSpace& labels);

// ---------------------------------------------------------------------------
// ASR baseline: per-frame linear projection onto a character alphabet,
// CTC training, greedy decoding, token-level decision.

class Alphabet {
 public:
  // blank, a-z, apostrophe, hyphen, space.
  static Alphabet folded();
  // folded() plus the lowercase French accented letters.
  static Alphabet accented();

  std::size_t size() const noexcept { return symbols_.size(); }
  bool keeps_accents() const noexcept { return accents_; }
  const std::string& symbol(int id) const { return symbols_.at(static_cast<std::size_t>(id)); }

  // Text must already be normalized; unknown characters throw IndexError.
  std::vector<int> encode(std::string_view normalized) const;
  std::string decode(std::span<const int> ids) const;

 private:
  Alphabet(std::vector<std::string> symbols, bool accents);
  std::vector<std::string> symbols_;
  bool accents_;
};

// Lowercases, optionally strips accents, collapses whitespace and drops
// anything the matching Alphabet cannot spell.
std::string normalize_text(std::string_view text, bool keep_accents = false);

std::vector<std::string> tokenize(std::string_view text);

template <typename T>
struct CtcParams {
  Param<T> weight;  // d_in x V
  Param<T> bias;    // 1 x V

  std::size_t input_dim() const noexcept { return weight.value.rows(); }
  std::size_t symbol_count() const noexcept { return weight.value.cols(); }
  std::vector<Param<T>*> all() { return {&weight, &bias}; }
};

template <typename T>
CtcParams<T> init_ctc(std::size_t input_dim, std::size_t symbols, std::uint64_t seed);

// frames * W + b, TxV logits.
template <typename T>
BasicMatrix<T> ctc_logits(const CtcParams<T>& p, const BasicMatrix<T>& frames);

template <typename T>
Var record_ctc_loss(Tape<T>& tape, CtcParams<T>& p, const BasicMatrix<T>& frames,
                    std::vector<int> target);

// Symbol ids of the per-frame argmax, repeats collapsed, blanks removed.
template <typename T>
std::string ctc_greedy_decode(const BasicMatrix<T>& logprobs, const Alphabet& alphabet);

template <typename T>
std::string transcribe(const CtcParams<T>& p, const Alphabet& alphabet, const BasicMatrix<T>& frames);

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b);

// Word-level Levenshtein distance over reference length.
double wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);

struct AsrDecisionOptions {
  bool raw_substring = false;
  bool keep_accents = false;
};

// word(target) when the normalized target occurs as a whole token of the
// normalized transcription (or anywhere, with raw_substring), otherwise
// mispronounced.
PromptLabel asr_decide(std::string_view transcription, std::string_view target_word,
                       const AsrDecisionOptions& options = {});

}  // namespace namegate
