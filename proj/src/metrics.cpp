#include "namegate/metrics.hpp"

#include "namegate/errors.hpp"

namespace namegate {

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= classes_ || predicted >= classes_) {
    throw IndexError("confusion matrix: class index out of range");
  }
  counts_[truth * classes_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const std::size_t c = cm.classes();
  MetricsReport r;
  r.total = cm.total();
  if (c == 0 || r.total == 0) throw EmptyInputError("compute_metrics: empty confusion matrix");

  std::uint64_t trace = 0;
  r.per_class.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    const std::uint64_t tp = cm.at(k, k);
    std::uint64_t predicted = 0;
    std::uint64_t actual = 0;
    for (std::size_t j = 0; j < c; ++j) {
      predicted += cm.at(j, k);
      actual += cm.at(k, j);
    }
    trace += tp;
    auto& m = r.per_class[k];
    m.support = actual;
    m.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    m.recall = actual == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(actual);
    const double denom = m.precision + m.recall;
    m.f1 = denom == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / denom;
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
  }
  r.macro_precision /= static_cast<double>(c);
  r.macro_recall /= static_cast<double>(c);
  r.macro_f1 /= static_cast<double>(c);
  r.accuracy = static_cast<double>(trace) / static_cast<double>(r.total);
  return r;
}

nlohmann::ordered_json metrics_conventions() {
  nlohmann::ordered_json j;
  j["zero_denominator"] = "precision, recall and F1 are 0 when undefined and still count in macro averages";
  j["class_set"] = "dataset vocabulary plus mispronounced, for every fold";
  j["fold_std"] = "population standard deviation over folds";
  return j;
}

nlohmann::ordered_json to_json(const MetricsReport& m, const std::vector<std::string>& class_names) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["macro_precision"] = m.macro_precision;
  j["macro_recall"] = m.macro_recall;
  j["macro_f1"] = m.macro_f1;
  j["total"] = m.total;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < m.per_class.size(); ++k) {
    nlohmann::ordered_json c;
    c["class"] = k < class_names.size() ? class_names[k] : std::to_string(k);
    c["precision"] = m.per_class[k].precision;
    c["recall"] = m.per_class[k].recall;
    c["f1"] = m.per_class[k].f1;
    c["support"] = m.per_class[k].support;
    classes.push_back(std::move(c));
  }
  j["per_class"] = std::move(classes);
  return j;
}

}  // namespace namegate
