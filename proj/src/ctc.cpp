#include "namegate/ctc.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "namegate/ops.hpp"

namespace namegate {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = a > b ? a : b;
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// Target with blanks interleaved: b l1 b l2 ... lL b.
std::vector<int> extend_with_blanks(std::span<const int> target) {
  std::vector<int> ext;
  ext.reserve(2 * target.size() + 1);
  ext.push_back(kCtcBlank);
  for (int sym : target) {
    ext.push_back(sym);
    ext.push_back(kCtcBlank);
  }
  return ext;
}

template <typename T>
void validate(const BasicMatrix<T>& m, std::span<const int> target) {
  if (m.cols() < 2) throw ShapeError("ctc: need at least 2 symbols, got " + m.shape_string());
  for (int sym : target) {
    if (sym <= kCtcBlank || static_cast<std::size_t>(sym) >= m.cols()) {
      throw IndexError("ctc: target symbol " + std::to_string(sym) +
                       " outside [1, " + std::to_string(m.cols()) + ")");
    }
  }
  const std::size_t need = ctc_min_frames(target);
  if (m.rows() < need || m.rows() == 0) {
    throw InfeasibleAlignmentError("ctc: " + std::to_string(m.rows()) +
                                   " frames cannot align a target needing " +
                                   std::to_string(need == 0 ? 1 : need));
  }
}

// alpha[t][s] in log space.
template <typename T>
std::vector<double> forward_table(const BasicMatrix<T>& logprobs, const std::vector<int>& ext) {
  const std::size_t frames = logprobs.rows();
  const std::size_t states = ext.size();
  std::vector<double> alpha(frames * states, kNegInf);
  auto lp = [&](std::size_t t, std::size_t s) {
    return static_cast<double>(logprobs(t, static_cast<std::size_t>(ext[s])));
  };
  alpha[0] = lp(0, 0);
  if (states > 1) alpha[1] = lp(0, 1);
  for (std::size_t t = 1; t < frames; ++t) {
    const double* prev = &alpha[(t - 1) * states];
    double* cur = &alpha[t * states];
    for (std::size_t s = 0; s < states; ++s) {
      double acc = prev[s];
      if (s >= 1) acc = log_add(acc, prev[s - 1]);
      if (s >= 2 && ext[s] != kCtcBlank && ext[s] != ext[s - 2]) acc = log_add(acc, prev[s - 2]);
      cur[s] = acc == kNegInf ? kNegInf : acc + lp(t, s);
    }
  }
  return alpha;
}

template <typename T>
std::vector<double> backward_table(const BasicMatrix<T>& logprobs, const std::vector<int>& ext) {
  const std::size_t frames = logprobs.rows();
  const std::size_t states = ext.size();
  std::vector<double> beta(frames * states, kNegInf);
  auto lp = [&](std::size_t t, std::size_t s) {
    return static_cast<double>(logprobs(t, static_cast<std::size_t>(ext[s])));
  };
  double* last = &beta[(frames - 1) * states];
  last[states - 1] = lp(frames - 1, states - 1);
  if (states > 1) last[states - 2] = lp(frames - 1, states - 2);
  for (std::size_t t = frames - 1; t-- > 0;) {
    const double* next = &beta[(t + 1) * states];
    double* cur = &beta[t * states];
    for (std::size_t s = 0; s < states; ++s) {
      double acc = next[s];
      if (s + 1 < states) acc = log_add(acc, next[s + 1]);
      if (s + 2 < states && ext[s] != kCtcBlank && ext[s] != ext[s + 2]) {
        acc = log_add(acc, next[s + 2]);
      }
      cur[s] = acc == kNegInf ? kNegInf : acc + lp(t, s);
    }
  }
  return beta;
}

double total_log_prob(const std::vector<double>& alpha, std::size_t frames, std::size_t states) {
  const double* last = &alpha[(frames - 1) * states];
  double lp = last[states - 1];
  if (states > 1) lp = log_add(lp, last[states - 2]);
  return lp;
}

}  // namespace

std::size_t ctc_min_frames(std::span<const int> target) {
  std::size_t need = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++need;
  return need;
}

template <typename T>
double ctc_loss(const BasicMatrix<T>& logprobs, std::span<const int> target) {
  validate(logprobs, target);
  const auto ext = extend_with_blanks(target);
  const auto alpha = forward_table(logprobs, ext);
  return -total_log_prob(alpha, logprobs.rows(), ext.size());
}

template <typename T>
CtcGradient<T> ctc_loss_and_grad(const BasicMatrix<T>& logits, std::span<const int> target) {
  validate(logits, target);
  const auto logprobs = log_softmax_rows(logits.template cast<double>());
  const auto ext = extend_with_blanks(target);
  const std::size_t frames = logits.rows();
  const std::size_t states = ext.size();
  const auto alpha = forward_table(logprobs, ext);
  const auto beta = backward_table(logprobs, ext);
  const double log_p = total_log_prob(alpha, frames, states);

  CtcGradient<T> out;
  out.loss = -log_p;
  out.grad = BasicMatrix<T>(frames, logits.cols());
  for (std::size_t t = 0; t < frames; ++t) {
    // Softmax minus the posterior occupancy of each symbol at frame t.
    std::vector<double> occupancy(logits.cols(), kNegInf);
    for (std::size_t s = 0; s < states; ++s) {
      const double a = alpha[t * states + s];
      const double b = beta[t * states + s];
      if (a == kNegInf || b == kNegInf) continue;
      const auto k = static_cast<std::size_t>(ext[s]);
      occupancy[k] = log_add(occupancy[k], a + b - logprobs(t, k));
    }
    for (std::size_t k = 0; k < logits.cols(); ++k) {
      const double soft = std::exp(logprobs(t, k));
      const double post = occupancy[k] == kNegInf ? 0.0 : std::exp(occupancy[k] - log_p);
      out.grad(t, k) = static_cast<T>(soft - post);
    }
  }
  return out;
}

template <typename T>
std::vector<int> ctc_greedy_path(const BasicMatrix<T>& logprobs) {
  std::vector<int> out;
  int prev = -1;
  for (std::size_t t = 0; t < logprobs.rows(); ++t) {
    const int sym = static_cast<int>(argmax_row(logprobs, t));
    if (sym != prev && sym != kCtcBlank) out.push_back(sym);
    prev = sym;
  }
  return out;
}

template double ctc_loss(const BasicMatrix<float>&, std::span<const int>);
template double ctc_loss(const BasicMatrix<double>&, std::span<const int>);
template CtcGradient<float> ctc_loss_and_grad(const BasicMatrix<float>&, std::span<const int>);
template CtcGradient<double> ctc_loss_and_grad(const BasicMatrix<double>&, std::span<const int>);
template std::vector<int> ctc_greedy_path(const BasicMatrix<float>&);
template std::vector<int> ctc_greedy_path(const BasicMatrix<double>&);

}  // namespace namegate
