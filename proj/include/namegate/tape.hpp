#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "namegate/matrix.hpp"

namespace namegate {

// A trainable tensor and its accumulated gradient.
template <typename T>
struct Param {
  std::string name;
  BasicMatrix<T> value;
  BasicMatrix<T> grad;
  // AdamW applies decoupled weight decay only where this is set.
  bool decay = true;

  Param() = default;
  Param(std::string n, BasicMatrix<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad = BasicMatrix<T>(value.rows(), value.cols()); }
};

// Handle into a Tape.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
};

template <typename T>
struct BatchStats {
  BasicMatrix<T> mean;  // 1xC
  BasicMatrix<T> var;   // 1xC, biased
};

// Gradient tape over the fixed set of primitives the model zoo needs.
// Ops record their outputs in order; backward() replays them in reverse and
// accumulates into the Param of every leaf.
template <typename T>
class Tape {
 public:
  Var leaf(Param<T>& p);
  Var constant(BasicMatrix<T> m);

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);
  Var add_bias(Var x, Var bias);
  Var l2_normalize_rows(Var x, double eps = 1e-12);
  // x * exp(s) for a 1x1 log-scale s.
  Var scale_exp(Var x, Var log_scale);
  Var relu(Var x);
  // Training-mode batch normalization over rows; optionally reports the
  // batch statistics used.
  Var batchnorm(Var x, Var gamma, Var beta, double eps, BatchStats<T>* stats = nullptr);
  Var mean_pool(Var x);
  // Fused row-softmax + mean cross-entropy; returns a 1x1 loss.
  Var softmax_cross_entropy(Var logits, std::vector<std::size_t> labels);
  // CTC negative log-likelihood of `target` given raw logits (TxV, blank 0).
  Var ctc(Var logits, std::vector<int> target);
  Var add(Var a, Var b);
  Var scale(Var x, T factor);

  const BasicMatrix<T>& value(Var v) const;
  T scalar(Var v) const;

  // Requires `loss` to be a 1x1 node recorded on this tape.
  void backward(Var loss);
  void clear() { nodes_.clear(); }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  using Pullback = std::function<void(Tape&, const BasicMatrix<T>&)>;

  struct Node {
    BasicMatrix<T> value;
    BasicMatrix<T> grad;
    Param<T>* param = nullptr;
    Pullback pullback;
  };

  Var push(BasicMatrix<T> value, Pullback pullback, Param<T>* param = nullptr);
  const Node& node(Var v) const;
  void accumulate(std::size_t id, const BasicMatrix<T>& g);

  std::vector<Node> nodes_;
};

}  // namespace namegate
