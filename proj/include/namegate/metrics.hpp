#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace namegate {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return classes_; }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_ + predicted];
  }
  std::uint64_t total() const noexcept;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::uint64_t total = 0;
};

// Per-class P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R); any zero
// denominator yields 0. Macro averages are unweighted over every class in
// the matrix, including classes with no support.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

// Conventions reported alongside every metrics document.
nlohmann::ordered_json metrics_conventions();

nlohmann::ordered_json to_json(const MetricsReport& m, const std::vector<std::string>& class_names);

}  // namespace namegate
