#include "namegate/optim.hpp"

#include <cmath>

namespace namegate {

template <typename T>
void OptimState<T>::step(std::span<Param<T>* const> params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (m_.size() != params.size()) {
    throw StateError("optimizer: parameter list changed between steps");
  }
  for (const auto* p : params) {
    if (!p->grad.same_shape(p->value)) {
      throw ShapeError("optimizer: grad of " + p->name + " has shape " + p->grad.shape_string());
    }
    if (!all_finite(p->grad)) {
      throw TrainingDivergedError("optimizer: non-finite gradient in " + p->name);
    }
  }

  ++t_;
  const double b1 = hyper_.beta1;
  const double b2 = hyper_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double decay = kind_ == OptimizerKind::AdamW ? hyper_.lr * hyper_.weight_decay : 0.0;

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    const bool decays = decay != 0.0 && p.decay;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      double theta = static_cast<double>(p.value[i]);
      if (decays) theta -= decay * theta;
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bias1;
      const double v_hat = vi / bias2;
      theta -= hyper_.lr * m_hat / (std::sqrt(v_hat) + hyper_.eps);
      p.value[i] = static_cast<T>(theta);
    }
  }
}

template <typename T>
void adam_step(OptimState<T>& state, std::span<Param<T>* const> params) {
  if (state.kind() != OptimizerKind::Adam) throw StateError("adam_step on an AdamW state");
  state.step(params);
}

template <typename T>
void adamw_step(OptimState<T>& state, std::span<Param<T>* const> params) {
  if (state.kind() != OptimizerKind::AdamW) throw StateError("adamw_step on an Adam state");
  state.step(params);
}

template class OptimState<float>;
template class OptimState<double>;
template void adam_step(OptimState<float>&, std::span<Param<float>* const>);
template void adam_step(OptimState<double>&, std::span<Param<double>* const>);
template void adamw_step(OptimState<float>&, std::span<Param<float>* const>);
template void adamw_step(OptimState<double>&, std::span<Param<double>* const>);

}  // namespace namegate
