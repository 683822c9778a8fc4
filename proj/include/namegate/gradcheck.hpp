#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "namegate/matrix.hpp"

namespace namegate {

// Magnitude below which relative error is measured against this floor
// instead of the gradient itself, so entries that are analytically zero
// compare on an absolute scale.
inline constexpr double kGradCheckFloor = 1e-3;

// Central differences (f(x+h) - f(x-h)) / 2h, one entry at a time. `f` must
// read `x` by reference; every entry is restored after probing.
template <typename T>
BasicMatrix<T> finite_difference_grad(const std::function<T()>& f, BasicMatrix<T>& x, T h) {
  BasicMatrix<T> grad(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = x[i];
    x[i] = saved + h;
    const T up = f();
    x[i] = saved - h;
    const T down = f();
    x[i] = saved;
    grad[i] = (up - down) / (T{2} * h);
  }
  return grad;
}

template <typename T>
double relative_error(T analytic, T numeric, double floor = kGradCheckFloor) {
  const double a = static_cast<double>(analytic);
  const double n = static_cast<double>(numeric);
  const double scale = std::max({std::abs(a), std::abs(n), floor});
  return std::abs(a - n) / scale;
}

template <typename T>
double max_relative_error(const BasicMatrix<T>& analytic, const BasicMatrix<T>& numeric,
                          double floor = kGradCheckFloor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, relative_error(analytic[i], numeric[i], floor));
  return worst;
}

}  // namespace namegate
