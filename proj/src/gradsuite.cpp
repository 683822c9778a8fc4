#include "namegate/gradsuite.hpp"

#include <algorithm>
#include <functional>

#include "namegate/baselines.hpp"
#include "namegate/ctc.hpp"
#include "namegate/gradcheck.hpp"
#include "namegate/matcher.hpp"
#include "namegate/rng.hpp"

namespace namegate {

namespace {

MatrixD random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  MatrixD m(r, c);
  for (auto& x : m.data()) x = rng.normal() * scale;
  return m;
}

// Compares the analytic gradient of every param in `params` with central
// differences of `loss`, which must record a fresh forward pass.
void check_params(GradSuiteReport& report, const std::string& model, std::uint64_t seed,
                  const std::vector<Param<double>*>& params,
                  const std::function<Var(Tape<double>&)>& record) {
  for (auto* p : params) p->zero_grad();
  Tape<double> tape;
  const Var loss = record(tape);
  tape.backward(loss);
  const auto f = [&] {
    Tape<double> t;
    return t.scalar(record(t));
  };
  for (auto* p : params) {
    const MatrixD numeric = finite_difference_grad<double>(f, p->value, kGradCheckStep);
    report.entries.push_back({model, p->name, seed, max_relative_error(p->grad, numeric)});
  }
}

void check_matcher(GradSuiteReport& report, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 11));
  auto p = init_matcher<double>(6, 5, 4, derive_seed(seed, 12));
  p.audio_bias.value = random_matrix(1, 4, rng, 0.1);
  p.text_bias.value = random_matrix(1, 4, rng, 0.1);
  p.audio_log_scale.value[0] = rng.uniform(0.0, 2.0);
  p.text_log_scale.value[0] = rng.uniform(0.0, 2.0);
  const MatrixD audio = random_matrix(4, 6, rng);
  const MatrixD text = random_matrix(4, 5, rng);
  check_params(report, "matcher", seed, p.all(),
               [&](Tape<double>& t) { return record_matcher_loss(t, p, audio, text); });
}

void check_classifier(GradSuiteReport& report, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 21));
  auto p = init_mlp<double>(5, 4, 6, derive_seed(seed, 22));
  p.hidden_bias.value = random_matrix(1, 6, rng, 0.1);
  p.output_bias.value = random_matrix(1, 4, rng, 0.1);
  for (auto& g : p.gamma.value.data()) g = rng.uniform(0.5, 1.5);
  p.beta.value = random_matrix(1, 6, rng, 0.1);
  const MatrixD pooled = random_matrix(6, 5, rng);
  std::vector<std::size_t> labels(6);
  for (auto& l : labels) l = static_cast<std::size_t>(rng.below(4));
  check_params(report, "classifier", seed, p.all(),
               [&](Tape<double>& t) { return record_mlp_loss(t, p, pooled, labels, false); });
}

void check_ctc(GradSuiteReport& report, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 31));
  const std::size_t vocab = 5;
  std::vector<int> target;
  const std::size_t len = 1 + static_cast<std::size_t>(rng.below(3));
  for (std::size_t i = 0; i < len; ++i) target.push_back(1 + static_cast<int>(rng.below(vocab - 1)));
  const std::size_t frames = ctc_min_frames(target) + 2 + static_cast<std::size_t>(rng.below(4));

  Param<double> logits("logits", random_matrix(frames, vocab, rng));
  check_params(report, "ctc", seed, {&logits},
               [&](Tape<double>& t) { return t.ctc(t.leaf(logits), target); });

  auto head = init_ctc<double>(4, vocab, derive_seed(seed, 32));
  head.bias.value = random_matrix(1, vocab, rng, 0.1);
  const MatrixD x = random_matrix(frames, 4, rng);
  check_params(report, "ctc", seed, head.all(),
               [&](Tape<double>& t) { return record_ctc_loss(t, head, x, target); });
}

}  // namespace

double GradSuiteReport::worst(const std::string& model) const {
  double w = 0.0;
  for (const auto& e : entries)
    if (model.empty() || e.model == model) w = std::max(w, e.max_relative_error);
  return w;
}

GradSuiteReport run_gradient_suite(std::uint64_t seed) {
  GradSuiteReport r;
  check_matcher(r, seed);
  check_classifier(r, seed);
  check_ctc(r, seed);
  return r;
}

GradSuiteReport run_gradient_suite(const std::vector<std::uint64_t>& seeds) {
  GradSuiteReport all;
  for (auto s : seeds) {
    auto r = run_gradient_suite(s);
    all.entries.insert(all.entries.end(), r.entries.begin(), r.entries.end());
  }
  return all;
}

nlohmann::ordered_json to_json(const GradSuiteReport& r) {
  nlohmann::ordered_json j;
  j["tolerance"] = kGradCheckTolerance;
  j["step"] = kGradCheckStep;
  j["max_relative_error"] = {{"matcher", r.worst("matcher")},
                             {"classifier", r.worst("classifier")},
                             {"ctc", r.worst("ctc")}};
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"model", e.model}, {"param", e.param}, {"seed", e.seed},
                       {"max_relative_error", e.max_relative_error}});
  }
  j["entries"] = std::move(entries);
  j["passed"] = r.passed();
  return j;
}

}  // namespace namegate
