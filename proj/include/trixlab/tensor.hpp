#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace trixlab {

using Shape = std::vector<std::size_t>;

// Dense row-major array of doubles. Rank 0 (scalar), 1 and 2 are used.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  // Leading dimension; 1 for scalars.
  std::size_t rows() const;
  // Product of trailing dimensions; 1 for scalars and vectors.
  std::size_t cols() const;

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::span<const double> row(std::size_t i) const;
  std::span<double> row(std::size_t i);

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols() + j]; }

  // Value of a single-element tensor.
  double item() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

std::string shape_string(const Shape& shape);

class Tape;

// Handle to a value recorded on a Tape. A default-constructed Var is detached.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  bool attached() const { return tape != nullptr; }
  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;
};

// Linear record of operations for reverse-mode differentiation. Nodes are
// appended in evaluation order, so the vector itself is a topological order.
// One tape per forward pass; it is not thread-safe.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);

  // Populates grad() on every node that requires grad. Gradients accumulate
  // if called again without zero_grad().
  void backward(Var loss);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;

  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  // Accessors for backward rules.
  const Tensor& value_at(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad_at(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad_at(std::size_t id) const { return nodes_[id].requires_grad; }
  std::span<double> grad_buffer(std::size_t id);

  std::size_t backward_visits() const { return backward_visits_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  std::size_t backward_visits_ = 0;
};

namespace ops {

// [m x k] * [k x n]
Var matmul(Var a, Var b);
// Adds a length-n bias (shape [n] or [1 x n]) to every row of an [m x n] input.
Var add_bias(Var x, Var bias);
// Elementwise sum of two same-shape values.
Var add(Var a, Var b);
Var scale(Var a, double factor);
// max(0, x); the subgradient at 0 is 0.
Var relu(Var a);
// Row-wise logits - logsumexp(logits).
Var log_softmax(Var logits);
// Per-row cross-entropy -log_softmax(logits)[i, labels[i]], shape [B].
Var cross_entropy_rows(Var logits, std::span<const int> labels);
// Per-row KL(softmax(p) || softmax(q)), shape [B]. Differentiable in both.
Var kl_rows(Var logits_p, Var logits_q);
// Row i from a when pick_a[i], else from b.
Var select_rows(const std::vector<bool>& pick_a, Var a, Var b);
Var sum(Var a);
Var mean(Var a);
// sum_i weights[i] * a[i] / divisor, for a of shape [B].
Var weighted_sum(Var a, std::span<const double> weights, double divisor = 1.0);

// Mean cross-entropy over the batch.
Var cross_entropy(Var logits, std::span<const int> labels);
// Mean KL(softmax(p) || softmax(q)) over the batch.
Var kl_divergence(Var logits_p, Var logits_q);

}  // namespace ops

// Row-wise softmax of plain values (no tape).
Tensor softmax(const Tensor& logits);
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace trixlab
