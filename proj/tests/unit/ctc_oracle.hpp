#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "namegate/matrix.hpp"

namespace testoracle {

// -log sum over every length-T path whose collapse (merge repeats, drop
// blank 0) equals `target`. Exponential in T; only for tiny instances.
inline double ctc_brute_force(const namegate::MatrixD& logprobs, const std::vector<int>& target) {
  const std::size_t t = logprobs.rows();
  const std::size_t v = logprobs.cols();
  std::vector<int> path(t, 0);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  for (;;) {
    std::vector<int> collapsed;
    int prev = -1;
    double lp = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      lp += logprobs(i, static_cast<std::size_t>(path[i]));
      if (path[i] != prev && path[i] != 0) collapsed.push_back(path[i]);
      prev = path[i];
    }
    if (collapsed == target) {
      terms.push_back(lp);
      best = std::max(best, lp);
    }
    std::size_t k = 0;
    while (k < t && ++path[k] == static_cast<int>(v)) path[k++] = 0;
    if (k == t) break;
  }
  if (terms.empty()) return std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (double x : terms) sum += std::exp(x - best);
  return -(best + std::log(sum));
}

}  // namespace testoracle
