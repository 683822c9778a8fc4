#pragma once

#include <cstddef>
#include <span>

#include "namegate/matrix.hpp"

namespace namegate {

inline constexpr double kDefaultNormEps = 1e-12;

// a (MxK) times b (KxN). Each output element accumulates k = 0..K-1 in
// order, so results are bit-reproducible for a given build.
template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b);

// a (MxK) times transpose(b) (NxK) -> MxN.
template <typename T>
BasicMatrix<T> matmul_nt(const BasicMatrix<T>& a, const BasicMatrix<T>& b);

// transpose(a) (KxM) times b (KxN) -> MxN.
template <typename T>
BasicMatrix<T> matmul_tn(const BasicMatrix<T>& a, const BasicMatrix<T>& b);

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& m);

// x + bias broadcast over rows; bias is 1xC.
template <typename T>
BasicMatrix<T> add_bias(const BasicMatrix<T>& x, const BasicMatrix<T>& bias);

// Throws DegenerateVectorError naming the first row with norm <= eps.
template <typename T>
BasicMatrix<T> l2_normalize_rows(const BasicMatrix<T>& m, double eps = kDefaultNormEps);

template <typename T>
BasicMatrix<T> softmax_rows(const BasicMatrix<T>& m);

template <typename T>
BasicMatrix<T> log_softmax_rows(const BasicMatrix<T>& m);

// Mean over rows of -log softmax(logits)[row, label].
template <typename T>
T cross_entropy_mean(const BasicMatrix<T>& logits, std::span<const std::size_t> labels);

template <typename T>
BasicMatrix<T> relu(const BasicMatrix<T>& m);

template <typename T>
BasicMatrix<T> scaled(const BasicMatrix<T>& m, T factor);

// Index of the largest entry of the row; ties go to the lowest index.
template <typename T>
std::size_t argmax_row(const BasicMatrix<T>& m, std::size_t row);

}  // namespace namegate
