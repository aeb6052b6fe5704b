#include "trixlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "trixlab/errors.hpp"

namespace trixlab {

namespace {

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

// Row-wise log-softmax of plain values.
Tensor log_softmax_values(const Tensor& logits) {
  Tensor out = logits;
  const std::size_t cols = logits.cols();
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = out.row(i);
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - top);
    const double shift = top + std::log(total);
    for (std::size_t j = 0; j < cols; ++j) row[j] -= shift;
  }
  return out;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
  }
  if (shape_product(shape_) != values_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not match " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const { return shape_.empty() ? 1 : shape_[0]; }

std::size_t Tensor::cols() const {
  if (shape_.size() < 2) return 1;
  return shape_product(Shape(shape_.begin() + 1, shape_.end()));
}

std::span<const double> Tensor::row(std::size_t i) const {
  return std::span<const double>(values_).subspan(i * cols(), cols());
}

std::span<double> Tensor::row(std::size_t i) {
  return std::span<double>(values_).subspan(i * cols(), cols());
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw DimensionError("item() on tensor with shape " + shape_string(shape_));
  }
  return values_[0];
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

const Tensor& Var::value() const {
  if (!tape) throw UsageError("value() on a detached Var");
  return tape->value(*this);
}

const Tensor& Var::grad() const {
  if (!tape) throw UsageError("grad() on a detached Var");
  return tape->grad(*this);
}

bool Var::requires_grad() const { return tape && tape->requires_grad(*this); }

// ---------------------------------------------------------------------------
// Tape

void Tape::check_owned(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw UsageError("Var does not belong to this tape");
  }
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  if (requires_grad) node.grad = Tensor::zeros(value.shape());
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  for (std::size_t id : inputs) needs = needs || nodes_.at(id).requires_grad;
  Node node;
  if (needs) {
    node.grad = Tensor::zeros(value.shape());
    node.backward = std::move(backward);
  }
  node.value = std::move(value);
  node.requires_grad = needs;
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id].value;
}

const Tensor& Tape::grad(Var v) const {
  check_owned(v);
  if (!nodes_[v.id].requires_grad) throw UsageError("grad() on a value that does not require grad");
  return nodes_[v.id].grad;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id].requires_grad;
}

std::span<double> Tape::grad_buffer(std::size_t id) { return nodes_[id].grad.values(); }

void Tape::zero_grad() {
  for (auto& node : nodes_) {
    std::fill(node.grad.values().begin(), node.grad.values().end(), 0.0);
  }
}

void Tape::backward(Var loss) {
  if (!loss.attached()) throw UsageError("backward on a detached tensor");
  check_owned(loss);
  Node& root = nodes_[loss.id];
  if (root.value.size() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " + shape_string(root.value.shape()));
  }
  if (!root.requires_grad) throw UsageError("backward on a tensor with no gradient path");
  root.grad.values()[0] += 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    if (nodes_[id].backward) {
      ++backward_visits_;
      nodes_[id].backward(*this, id);
    }
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace ops {

namespace {

Tape& tape_of(Var a) {
  if (!a.attached()) throw UsageError("operation on a detached Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape != a.tape) throw UsageError("operands live on different tapes");
  return t;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  if (bv.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor out = Tensor::zeros({m, n});
  const double* A = av.values().data();
  const double* B = bv.values().data();
  double* C = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * n;
      double* crow = C + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
    const double* G = t.grad_at(self).values().data();
    const double* A = t.value_at(ia).values().data();
    const double* B = t.value_at(ib).values().data();
    if (t.needs_grad_at(ia)) {
      double* GA = t.grad_buffer(ia).data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          GA[i * k + p] += acc;
        }
      }
    }
    if (t.needs_grad_at(ib)) {
      double* GB = t.grad_buffer(ib).data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          double* gbrow = GB + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = tape_of(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require_matrix(xv, "add_bias");
  const std::size_t m = xv.rows(), n = xv.cols();
  if (bv.size() != n) {
    throw DimensionError("add_bias: bias of size " + std::to_string(bv.size()) +
                         " for rows of width " + std::to_string(n));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < m; ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < n; ++j) row[j] += bv[j];
  }
  const std::size_t ix = x.id, ibias = bias.id;
  return tape.record(std::move(out), {ix, ibias}, [ix, ibias, m, n](Tape& t, std::size_t self) {
    const auto g = t.grad_at(self).values();
    if (t.needs_grad_at(ix)) {
      auto gx = t.grad_buffer(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.needs_grad_at(ibias)) {
      auto gb = t.grad_buffer(ibias);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
      }
    }
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  auto bv = b.value().values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const auto g = t.grad_at(self).values();
    for (std::size_t id : {ia, ib}) {
      if (!t.needs_grad_at(id)) continue;
      auto gi = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  const std::size_t ia = a.id;
  return tape.record(std::move(out), {ia}, [ia, factor](Tape& t, std::size_t self) {
    const auto g = t.grad_at(self).values();
    auto gi = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += factor * g[i];
  });
}

Var relu(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  const std::size_t ia = a.id;
  return tape.record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const auto g = t.grad_at(self).values();
    const auto x = t.value_at(ia).values();
    auto gi = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) gi[i] += g[i];
    }
  });
}

Var log_softmax(Var logits) {
  Tape& tape = tape_of(logits);
  require_matrix(logits.value(), "log_softmax");
  if (logits.value().cols() < 2) throw DimensionError("log_softmax: need at least 2 classes");
  Tensor out = log_softmax_values(logits.value());
  const std::size_t il = logits.id;
  return tape.record(std::move(out), {il}, [il](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& y = t.value_at(self);
    auto gi = t.grad_buffer(il);
    const std::size_t cols = y.cols();
    for (std::size_t i = 0; i < y.rows(); ++i) {
      auto grow = g.row(i);
      auto yrow = y.row(i);
      const double total = std::accumulate(grow.begin(), grow.end(), 0.0);
      for (std::size_t j = 0; j < cols; ++j) {
        gi[i * cols + j] += grow[j] - std::exp(yrow[j]) * total;
      }
    }
  });
}

Var cross_entropy_rows(Var logits, std::span<const int> labels) {
  Tape& tape = tape_of(logits);
  const Tensor& lv = logits.value();
  require_matrix(lv, "cross_entropy");
  const std::size_t rows = lv.rows(), cols = lv.cols();
  if (labels.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= cols) {
      throw IndexError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(cols) + ")");
    }
  }
  Tensor logp = log_softmax_values(lv);
  Tensor out = Tensor::zeros({rows});
  for (std::size_t i = 0; i < rows; ++i) out[i] = -logp(i, static_cast<std::size_t>(labels[i]));
  std::vector<int> targets(labels.begin(), labels.end());
  const std::size_t il = logits.id;
  return tape.record(std::move(out), {il},
                     [il, logp = std::move(logp), targets = std::move(targets)](Tape& t, std::size_t self) {
                       const auto g = t.grad_at(self).values();
                       auto gi = t.grad_buffer(il);
                       const std::size_t cols = logp.cols();
                       for (std::size_t i = 0; i < logp.rows(); ++i) {
                         for (std::size_t j = 0; j < cols; ++j) {
                           const double p = std::exp(logp(i, j));
                           const double onehot = static_cast<int>(j) == targets[i] ? 1.0 : 0.0;
                           gi[i * cols + j] += g[i] * (p - onehot);
                         }
                       }
                     });
}

Var kl_rows(Var logits_p, Var logits_q) {
  Tape& tape = tape_of(logits_p, logits_q);
  require_matrix(logits_p.value(), "kl_divergence");
  require_same_shape(logits_p.value(), logits_q.value(), "kl_divergence");
  Tensor lp = log_softmax_values(logits_p.value());
  Tensor lq = log_softmax_values(logits_q.value());
  const std::size_t rows = lp.rows(), cols = lp.cols();
  Tensor out = Tensor::zeros({rows});
  for (std::size_t i = 0; i < rows; ++i) {
    double kl = 0.0;
    for (std::size_t j = 0; j < cols; ++j) kl += std::exp(lp(i, j)) * (lp(i, j) - lq(i, j));
    out[i] = kl;
  }
  const std::size_t ip = logits_p.id, iq = logits_q.id;
  return tape.record(
      std::move(out), {ip, iq},
      [ip, iq, lp = std::move(lp), lq = std::move(lq)](Tape& t, std::size_t self) {
        const auto g = t.grad_at(self).values();
        const auto kl = t.value_at(self).values();
        const std::size_t cols = lp.cols();
        const bool want_p = t.needs_grad_at(ip), want_q = t.needs_grad_at(iq);
        for (std::size_t i = 0; i < lp.rows(); ++i) {
          for (std::size_t j = 0; j < cols; ++j) {
            const double p = std::exp(lp(i, j));
            if (want_p) t.grad_buffer(ip)[i * cols + j] += g[i] * p * (lp(i, j) - lq(i, j) - kl[i]);
            if (want_q) t.grad_buffer(iq)[i * cols + j] += g[i] * (std::exp(lq(i, j)) - p);
          }
        }
      });
}

Var select_rows(const std::vector<bool>& pick_a, Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_matrix(a.value(), "select_rows");
  require_same_shape(a.value(), b.value(), "select_rows");
  if (pick_a.size() != a.value().rows()) {
    throw DimensionError("select_rows: mask length " + std::to_string(pick_a.size()) +
                         " for " + std::to_string(a.value().rows()) + " rows");
  }
  Tensor out = b.value();
  for (std::size_t i = 0; i < pick_a.size(); ++i) {
    if (pick_a[i]) std::ranges::copy(a.value().row(i), out.row(i).begin());
  }
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib, pick_a](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const std::size_t cols = g.cols();
    for (std::size_t i = 0; i < pick_a.size(); ++i) {
      const std::size_t target = pick_a[i] ? ia : ib;
      if (!t.needs_grad_at(target)) continue;
      auto gt = t.grad_buffer(target);
      auto grow = g.row(i);
      for (std::size_t j = 0; j < cols; ++j) gt[i * cols + j] += grow[j];
    }
  });
}

Var weighted_sum(Var a, std::span<const double> weights, double divisor) {
  Tape& tape = tape_of(a);
  const auto av = a.value().values();
  if (weights.size() != av.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(av.size()) + " values");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) total += weights[i] * av[i];
  std::vector<double> w(weights.begin(), weights.end());
  const std::size_t ia = a.id;
  return tape.record(Tensor::scalar(total / divisor), {ia},
                     [ia, w = std::move(w), divisor](Tape& t, std::size_t self) {
                       const double g = t.grad_at(self)[0] / divisor;
                       auto gi = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < w.size(); ++i) gi[i] += g * w[i];
                     });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  const auto av = a.value().values();
  const double total = std::accumulate(av.begin(), av.end(), 0.0);
  const std::size_t ia = a.id;
  return tape.record(Tensor::scalar(total), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad_at(self)[0];
    for (double& v : t.grad_buffer(ia)) v += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(tape_of(a).value(a).size());
  return scale(sum(a), 1.0 / n);
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  return mean(cross_entropy_rows(logits, labels));
}

Var kl_divergence(Var logits_p, Var logits_q) { return mean(kl_rows(logits_p, logits_q)); }

}  // namespace ops

Tensor softmax(const Tensor& logits) {
  require_matrix(logits, "softmax");
  Tensor out = log_softmax_values(logits);
  for (double& v : out.values()) v = std::exp(v);
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace trixlab
