#include "namegate/tape.hpp"

#include <cmath>

#include "namegate/ctc.hpp"
#include "namegate/ops.hpp"

namespace namegate {

template <typename T>
Var Tape<T>::push(BasicMatrix<T> value, Pullback pullback, Param<T>* param) {
  nodes_.push_back(Node{std::move(value), {}, param, std::move(pullback)});
  return Var{nodes_.size() - 1};
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id >= nodes_.size()) throw StateError("tape: variable is not recorded on this tape");
  return nodes_[v.id];
}

template <typename T>
const BasicMatrix<T>& Tape<T>::value(Var v) const {
  return node(v).value;
}

template <typename T>
T Tape<T>::scalar(Var v) const {
  const auto& m = value(v);
  if (m.size() != 1) throw ShapeError("tape: expected a scalar, got " + m.shape_string());
  return m[0];
}

template <typename T>
void Tape<T>::accumulate(std::size_t id, const BasicMatrix<T>& g) {
  auto& n = nodes_[id];
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

template <typename T>
Var Tape<T>::leaf(Param<T>& p) {
  return push(p.value, nullptr, &p);
}

template <typename T>
Var Tape<T>::constant(BasicMatrix<T> m) {
  return push(std::move(m), nullptr);
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  auto out = namegate::matmul(value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, const BasicMatrix<T>& g) {
    t.accumulate(a.id, namegate::matmul_nt(g, t.value(b)));
    t.accumulate(b.id, namegate::matmul_tn(t.value(a), g));
  });
}

template <typename T>
Var Tape<T>::matmul_nt(Var a, Var b) {
  auto out = namegate::matmul_nt(value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, const BasicMatrix<T>& g) {
    t.accumulate(a.id, namegate::matmul(g, t.value(b)));
    t.accumulate(b.id, namegate::matmul_tn(g, t.value(a)));
  });
}

template <typename T>
Var Tape<T>::add_bias(Var x, Var bias) {
  auto out = namegate::add_bias(value(x), value(bias));
  return push(std::move(out), [x, bias](Tape& t, const BasicMatrix<T>& g) {
    t.accumulate(x.id, g);
    BasicMatrix<T> gb(1, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
    t.accumulate(bias.id, gb);
  });
}

template <typename T>
Var Tape<T>::l2_normalize_rows(Var x, double eps) {
  const auto& in = value(x);
  auto out = namegate::l2_normalize_rows(in, eps);
  std::vector<T> norms(in.rows());
  for (std::size_t i = 0; i < in.rows(); ++i) {
    T sq{0};
    for (T v : in.row(i)) sq += v * v;
    norms[i] = std::sqrt(sq);
  }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [x, self, norms = std::move(norms)](Tape& t, const BasicMatrix<T>& g) {
    const auto& y = t.nodes_[self].value;
    BasicMatrix<T> gx(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      T dot{0};
      for (std::size_t j = 0; j < g.cols(); ++j) dot += y(i, j) * g(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) = (g(i, j) - y(i, j) * dot) / norms[i];
    }
    t.accumulate(x.id, gx);
  });
}

template <typename T>
Var Tape<T>::scale_exp(Var x, Var log_scale) {
  const T factor = std::exp(scalar(log_scale));
  auto out = scaled(value(x), factor);
  const std::size_t self = nodes_.size();
  return push(std::move(out), [x, log_scale, factor, self](Tape& t, const BasicMatrix<T>& g) {
    t.accumulate(x.id, scaled(g, factor));
    const auto& y = t.nodes_[self].value;
    T ds{0};
    for (std::size_t i = 0; i < g.size(); ++i) ds += g[i] * y[i];
    t.accumulate(log_scale.id, BasicMatrix<T>::scalar(ds));
  });
}

template <typename T>
Var Tape<T>::relu(Var x) {
  auto out = namegate::relu(value(x));
  return push(std::move(out), [x](Tape& t, const BasicMatrix<T>& g) {
    const auto& in = t.value(x);
    BasicMatrix<T> gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!(in[i] > T{0})) gx[i] = T{0};
    t.accumulate(x.id, gx);
  });
}

template <typename T>
Var Tape<T>::batchnorm(Var x, Var gamma, Var beta, double eps, BatchStats<T>* stats) {
  const auto& in = value(x);
  const std::size_t n = in.rows();
  const std::size_t c = in.cols();
  if (n < 2) throw ShapeError("batchnorm: training mode needs at least 2 rows");
  const auto& gm = value(gamma);
  const auto& bt = value(beta);
  if (gm.rows() != 1 || gm.cols() != c || !bt.same_shape(gm)) {
    throw ShapeError("batchnorm: affine parameters do not match " + in.shape_string());
  }
  BasicMatrix<T> mean(1, c);
  BasicMatrix<T> var(1, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) mean[j] += in(i, j);
  for (std::size_t j = 0; j < c; ++j) mean[j] /= static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const T d = in(i, j) - mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < c; ++j) var[j] /= static_cast<T>(n);

  std::vector<T> inv_std(c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = T{1} / std::sqrt(var[j] + static_cast<T>(eps));
  BasicMatrix<T> xhat(n, c);
  BasicMatrix<T> out(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      xhat(i, j) = (in(i, j) - mean[j]) * inv_std[j];
      out(i, j) = gm[j] * xhat(i, j) + bt[j];
    }
  if (stats != nullptr) *stats = BatchStats<T>{mean, var};

  return push(std::move(out), [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                                  Tape& t, const BasicMatrix<T>& g) {
    const std::size_t rows = g.rows();
    const std::size_t cols = g.cols();
    const auto& gm = t.value(gamma);
    BasicMatrix<T> dgamma(1, cols);
    BasicMatrix<T> dbeta(1, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        dbeta[j] += g(i, j);
        dgamma[j] += g(i, j) * xhat(i, j);
      }
    BasicMatrix<T> dx(rows, cols);
    const T count = static_cast<T>(rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        dx(i, j) = gm[j] * inv_std[j] / count *
                   (count * g(i, j) - dbeta[j] - xhat(i, j) * dgamma[j]);
      }
    t.accumulate(x.id, dx);
    t.accumulate(gamma.id, dgamma);
    t.accumulate(beta.id, dbeta);
  });
}

template <typename T>
Var Tape<T>::mean_pool(Var x) {
  const auto& in = value(x);
  if (in.rows() == 0) throw EmptyInputError("mean_pool: no rows");
  BasicMatrix<T> out(1, in.cols());
  for (std::size_t i = 0; i < in.rows(); ++i)
    for (std::size_t j = 0; j < in.cols(); ++j) out[j] += in(i, j);
  for (T& v : out.data()) v /= static_cast<T>(in.rows());
  const std::size_t rows = in.rows();
  return push(std::move(out), [x, rows](Tape& t, const BasicMatrix<T>& g) {
    BasicMatrix<T> gx(rows, g.cols());
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) = g[j] / static_cast<T>(rows);
    t.accumulate(x.id, gx);
  });
}

template <typename T>
Var Tape<T>::softmax_cross_entropy(Var logits, std::vector<std::size_t> labels) {
  const auto& in = value(logits);
  const T loss = cross_entropy_mean(in, std::span<const std::size_t>(labels));
  return push(BasicMatrix<T>::scalar(loss), [logits, labels = std::move(labels)](
                                                Tape& t, const BasicMatrix<T>& g) {
    auto gx = softmax_rows(t.value(logits));
    const T scale = g[0] / static_cast<T>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) gx(i, labels[i]) -= T{1};
    for (T& v : gx.data()) v *= scale;
    t.accumulate(logits.id, gx);
  });
}

template <typename T>
Var Tape<T>::ctc(Var logits, std::vector<int> target) {
  auto result = ctc_loss_and_grad(value(logits), std::span<const int>(target));
  return push(BasicMatrix<T>::scalar(static_cast<T>(result.loss)),
              [logits, grad = std::move(result.grad)](Tape& t, const BasicMatrix<T>& g) {
                t.accumulate(logits.id, scaled(grad, g[0]));
              });
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  if (!va.same_shape(vb)) {
    throw ShapeError("add: " + va.shape_string() + " vs " + vb.shape_string());
  }
  BasicMatrix<T> out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  return push(std::move(out), [a, b](Tape& t, const BasicMatrix<T>& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

template <typename T>
Var Tape<T>::scale(Var x, T factor) {
  auto out = scaled(value(x), factor);
  return push(std::move(out), [x, factor](Tape& t, const BasicMatrix<T>& g) {
    t.accumulate(x.id, scaled(g, factor));
  });
}

template <typename T>
void Tape<T>::backward(Var loss) {
  if (nodes_.empty() || loss.id >= nodes_.size()) {
    throw StateError("backward: no forward pass recorded for this loss");
  }
  if (nodes_[loss.id].value.size() != 1) {
    throw StateError("backward: loss must be a scalar, got " +
                     nodes_[loss.id].value.shape_string());
  }
  for (auto& n : nodes_) n.grad = BasicMatrix<T>();
  nodes_[loss.id].grad = BasicMatrix<T>::scalar(T{1});
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].grad.empty()) continue;
    if (nodes_[i].pullback) {
      const BasicMatrix<T> g = nodes_[i].grad;
      nodes_[i].pullback(*this, g);
    }
    if (nodes_[i].param != nullptr) {
      auto& p = *nodes_[i].param;
      if (p.grad.empty() || !p.grad.same_shape(p.value)) p.zero_grad();
      for (std::size_t k = 0; k < p.grad.size(); ++k) p.grad[k] += nodes_[i].grad[k];
    }
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace namegate
