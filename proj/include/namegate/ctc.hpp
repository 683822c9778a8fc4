#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "namegate/matrix.hpp"

namespace namegate {

inline constexpr int kCtcBlank = 0;

// Fewest frames that can emit `target`: one per symbol plus one blank
// between every pair of equal neighbours.
std::size_t ctc_min_frames(std::span<const int> target);

// -log P(target | logprobs), summed over all alignments with the forward
// recursion in log space. `logprobs` is TxV, row-normalized in log space.
template <typename T>
double ctc_loss(const BasicMatrix<T>& logprobs, std::span<const int> target);

template <typename T>
struct CtcGradient {
  double loss = 0.0;
  BasicMatrix<T> grad;  // d loss / d logits, TxV
};

// Loss and gradient w.r.t. raw logits (log-softmax applied internally),
// via forward-backward.
template <typename T>
CtcGradient<T> ctc_loss_and_grad(const BasicMatrix<T>& logits, std::span<const int> target);

// Per-frame argmax, collapse repeats, drop blanks.
template <typename T>
std::vector<int> ctc_greedy_path(const BasicMatrix<T>& logprobs);

}  // namespace namegate
