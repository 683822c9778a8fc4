#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "namegate/tape.hpp"

namespace namegate {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // AdamW only
};

enum class OptimizerKind { Adam, AdamW };

// Moments for a fixed list of Params. The step count is shared, as in the
// usual single-group setup.
template <typename T>
class OptimState {
 public:
  OptimState(OptimizerKind kind, AdamHyper hyper) : kind_(kind), hyper_(hyper) {}

  OptimizerKind kind() const noexcept { return kind_; }
  const AdamHyper& hyper() const noexcept { return hyper_; }
  std::size_t step_count() const noexcept { return t_; }
  const std::vector<BasicMatrix<T>>& first_moments() const noexcept { return m_; }
  const std::vector<BasicMatrix<T>>& second_moments() const noexcept { return v_; }

  // Applies one update using each Param's current grad. Throws
  // TrainingDivergedError, leaving everything untouched, if any gradient
  // entry is not finite.
  void step(std::span<Param<T>* const> params);

 private:
  OptimizerKind kind_;
  AdamHyper hyper_;
  std::size_t t_ = 0;
  std::vector<BasicMatrix<T>> m_;
  std::vector<BasicMatrix<T>> v_;
};

// Free-function forms.
template <typename T>
void adam_step(OptimState<T>& state, std::span<Param<T>* const> params);
template <typename T>
void adamw_step(OptimState<T>& state, std::span<Param<T>* const> params);

}  // namespace namegate
