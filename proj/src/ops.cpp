#include "namegate/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace namegate {

template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree for " + a.shape_string() +
                     " and " + b.shape_string());
  }
  BasicMatrix<T> out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* dst = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      const T* src = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

template <typename T>
BasicMatrix<T> matmul_nt(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions disagree for " + a.shape_string() +
                     " and transpose of " + b.shape_string());
  }
  BasicMatrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto br = b.row(j);
      T acc{0};
      for (std::size_t k = 0; k < ar.size(); ++k) acc += ar[k] * br[k];
      out(i, j) = acc;
    }
  }
  return out;
}

template <typename T>
BasicMatrix<T> matmul_tn(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: inner dimensions disagree for transpose of " +
                     a.shape_string() + " and " + b.shape_string());
  }
  BasicMatrix<T> out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const T* src = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T aki = a(k, i);
      T* dst = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) dst[j] += aki * src[j];
    }
  }
  return out;
}

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& m) {
  BasicMatrix<T> out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

template <typename T>
BasicMatrix<T> add_bias(const BasicMatrix<T>& x, const BasicMatrix<T>& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw ShapeError("add_bias: bias " + bias.shape_string() + " does not fit " +
                     x.shape_string());
  }
  BasicMatrix<T> out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
  return out;
}

template <typename T>
BasicMatrix<T> l2_normalize_rows(const BasicMatrix<T>& m, double eps) {
  BasicMatrix<T> out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.row(i);
    T sq{0};
    for (T v : r) sq += v * v;
    const T norm = std::sqrt(sq);
    if (!(static_cast<double>(norm) > eps)) {
      throw DegenerateVectorError(i, "l2_normalize_rows: row " + std::to_string(i) +
                                         " has norm <= eps");
    }
    for (T& v : r) v /= norm;
  }
  return out;
}

template <typename T>
BasicMatrix<T> softmax_rows(const BasicMatrix<T>& m) {
  BasicMatrix<T> out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.row(i);
    if (r.empty()) continue;
    const T mx = *std::max_element(r.begin(), r.end());
    T sum{0};
    for (T& v : r) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (T& v : r) v /= sum;
  }
  return out;
}

template <typename T>
BasicMatrix<T> log_softmax_rows(const BasicMatrix<T>& m) {
  BasicMatrix<T> out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.row(i);
    if (r.empty()) continue;
    const T mx = *std::max_element(r.begin(), r.end());
    T sum{0};
    for (T v : r) sum += std::exp(v - mx);
    const T lse = mx + std::log(sum);
    for (T& v : r) v -= lse;
  }
  return out;
}

template <typename T>
T cross_entropy_mean(const BasicMatrix<T>& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows()) {
    throw ShapeError("cross_entropy_mean: " + std::to_string(labels.size()) +
                     " labels for logits " + logits.shape_string());
  }
  if (logits.rows() == 0) throw EmptyInputError("cross_entropy_mean: no rows");
  const auto logp = log_softmax_rows(logits);
  T total{0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= logits.cols()) {
      throw IndexError("cross_entropy_mean: label " + std::to_string(labels[i]) +
                       " out of range for " + std::to_string(logits.cols()) + " classes");
    }
    total -= logp(i, labels[i]);
  }
  return total / static_cast<T>(labels.size());
}

template <typename T>
BasicMatrix<T> relu(const BasicMatrix<T>& m) {
  BasicMatrix<T> out = m;
  for (T& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
BasicMatrix<T> scaled(const BasicMatrix<T>& m, T factor) {
  BasicMatrix<T> out = m;
  for (T& v : out.data()) v *= factor;
  return out;
}

template <typename T>
std::size_t argmax_row(const BasicMatrix<T>& m, std::size_t row) {
  const auto r = m.row(row);
  std::size_t best = 0;
  for (std::size_t j = 1; j < r.size(); ++j)
    if (r[j] > r[best]) best = j;
  return best;
}

#define NAMEGATE_INSTANTIATE_OPS(T)                                                   \
  template BasicMatrix<T> matmul(const BasicMatrix<T>&, const BasicMatrix<T>&);       \
  template BasicMatrix<T> matmul_nt(const BasicMatrix<T>&, const BasicMatrix<T>&);    \
  template BasicMatrix<T> matmul_tn(const BasicMatrix<T>&, const BasicMatrix<T>&);    \
  template BasicMatrix<T> transpose(const BasicMatrix<T>&);                           \
  template BasicMatrix<T> add_bias(const BasicMatrix<T>&, const BasicMatrix<T>&);     \
  template BasicMatrix<T> l2_normalize_rows(const BasicMatrix<T>&, double);           \
  template BasicMatrix<T> softmax_rows(const BasicMatrix<T>&);                        \
  template BasicMatrix<T> log_softmax_rows(const BasicMatrix<T>&);                    \
  template T cross_entropy_mean(const BasicMatrix<T>&, std::span<const std::size_t>); \
  template BasicMatrix<T> relu(const BasicMatrix<T>&);                                \
  template BasicMatrix<T> scaled(const BasicMatrix<T>&, T);                           \
  template std::size_t argmax_row(const BasicMatrix<T>&, std::size_t);

NAMEGATE_INSTANTIATE_OPS(float)
NAMEGATE_INSTANTIATE_OPS(double)

#undef NAMEGATE_INSTANTIATE_OPS

}  // namespace namegate
