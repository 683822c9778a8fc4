#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace namegate {

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;

struct GradCheckEntry {
  std::string model;  // matcher, classifier, ctc
  std::string param;
  std::uint64_t seed = 0;
  double max_relative_error = 0.0;
};

struct GradSuiteReport {
  std::vector<GradCheckEntry> entries;

  // Worst error over every entry of `model`, or over all entries.
  double worst(const std::string& model = "") const;
  bool passed(double tolerance = kGradCheckTolerance) const { return worst() < tolerance; }
};

// Analytic tape gradients against central differences in double precision
// for the matcher loss (every head parameter and both logit scales), the
// classifier loss (including batchnorm gamma and beta) and the CTC loss
// (raw logits and the linear head), on small random instances drawn from
// `seed`.
GradSuiteReport run_gradient_suite(std::uint64_t seed);
GradSuiteReport run_gradient_suite(const std::vector<std::uint64_t>& seeds);

nlohmann::ordered_json to_json(const GradSuiteReport& r);

}  // namespace namegate
