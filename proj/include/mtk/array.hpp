#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mtk/rng.hpp"

// Reverse-mode differentiable array engine. Dense 64-bit float tensors with
// a dynamically recorded graph: every op that sees a grad-requiring input
// registers a backward closure, and backward() replays them in reverse
// topological order. Desk-scale by design: plain loops, no vectorized
// kernels, determinism over speed.

namespace mtk::nd {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t numel(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;               // leaf that accumulates gradient
  std::vector<double> grad;                 // persistent for leaves, scratch for interior
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;      // reads this->grad, accumulates into parents

  bool needs_grad() const { return requires_grad || static_cast<bool>(backward); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

bool grad_enabled();

// accumulate g into node's gradient if it participates in the graph
void accumulate(const std::shared_ptr<Node>& node, const std::vector<double>& g);

}  // namespace detail

// Pauses graph recording for its lifetime (evaluation / finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class Array {
 public:
  Array() = default;

  static Array zeros(Shape shape, bool requires_grad = false);
  static Array full(Shape shape, double v, bool requires_grad = false);
  static Array from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Array scalar(double v, bool requires_grad = false);
  static Array uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);
  static Array normal(Shape shape, double mean, double stddev, Rng& rng, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t ndim() const { return int64_t(node_->shape.size()); }
  int64_t dim(int64_t i) const;  // negative indices count from the back
  int64_t size() const { return int64_t(node_->value.size()); }

  const std::vector<double>& data() const { return node_->value; }
  std::vector<double>& mutable_data() { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Array& set_requires_grad(bool rg);
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  const std::vector<double>& grad() const;
  std::vector<double>& mutable_grad();
  void zero_grad();

  // identity of the underlying node; two handles alias iff equal
  const void* id() const { return node_.get(); }

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Array(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// --- elementwise ---------------------------------------------------------
// Binary ops broadcast by the trailing-dimension rule (right-aligned, a
// dimension must match or be 1). Mismatches throw with both shapes.

Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array div(const Array& a, const Array& b);

Array neg(const Array& a);
Array exp(const Array& a);
Array log(const Array& a);
Array sqrt(const Array& a);
Array abs(const Array& a);
Array silu(const Array& a);
Array softplus(const Array& a);
Array sigmoid(const Array& a);
// arccos with the argument clamped to [-1+eps, 1-eps]; zero slope outside
Array acos_clamped(const Array& a, double eps = 1e-6);
// phi1(z) = (exp(z) - 1) / z with a series branch near 0 (exact-ZOH helper)
Array phi1(const Array& a);

Array add_scalar(const Array& a, double c);
Array mul_scalar(const Array& a, double c);

inline Array operator+(const Array& a, const Array& b) { return add(a, b); }
inline Array operator-(const Array& a, const Array& b) { return sub(a, b); }
inline Array operator*(const Array& a, const Array& b) { return mul(a, b); }
inline Array operator/(const Array& a, const Array& b) { return div(a, b); }
inline Array operator-(const Array& a) { return neg(a); }
inline Array operator*(const Array& a, double c) { return mul_scalar(a, c); }
inline Array operator*(double c, const Array& a) { return mul_scalar(a, c); }
inline Array operator+(const Array& a, double c) { return add_scalar(a, c); }
inline Array operator+(double c, const Array& a) { return add_scalar(a, c); }
inline Array operator-(const Array& a, double c) { return add_scalar(a, -c); }

// --- reductions -----------------------------------------------------------

Array sum(const Array& a);
Array mean(const Array& a);
Array sum_axis(const Array& a, int64_t axis, bool keepdims = false);
Array mean_axis(const Array& a, int64_t axis, bool keepdims = false);

// --- movement -------------------------------------------------------------

Array reshape(const Array& a, Shape shape);
Array permute(const Array& a, const std::vector<int64_t>& axes);
Array transpose2d(const Array& a);  // swaps the last two axes
Array concat(const std::vector<Array>& parts, int64_t axis);
Array slice(const Array& a, int64_t axis, int64_t start, int64_t len);
std::vector<Array> split(const Array& a, int64_t axis, const std::vector<int64_t>& sizes);
Array repeat_interleave(const Array& a, int64_t axis, int64_t k);
// adaptive mean pooling along `axis` down to out_len buckets
Array pool_mean(const Array& a, int64_t axis, int64_t out_len);
// rows of a 2-D table selected by index; gradient scatters back
Array gather_rows(const Array& table, const std::vector<int64_t>& ids);

// value copy detached from the graph (stop-gradient)
Array detach(const Array& a);

// --- linear algebra -------------------------------------------------------

// (..., m, k) x (..., k, n) with identical leading dims
Array matmul(const Array& a, const Array& b);
// x: (..., in), w: (in, out), b: (out) or undefined
Array linear(const Array& x, const Array& w, const Array& b);
// x: (B, T, Cin), w: (K, Cin, Cout), b: (Cout) or undefined.
// out length = floor((T + pad_l + pad_r - K) / stride) + 1
Array conv1d(const Array& x, const Array& w, const Array& b, int64_t stride,
             int64_t pad_l, int64_t pad_r);
inline Array conv1d(const Array& x, const Array& w, const Array& b,
                    int64_t stride, int64_t pad) {
  return conv1d(x, w, b, stride, pad, pad);
}

Array softmax(const Array& a, int64_t axis);
Array log_softmax(const Array& a, int64_t axis);
// normalizes over the last axis; gamma/beta shaped (last_dim) or undefined
Array layer_norm(const Array& x, const Array& gamma, const Array& beta,
                 double eps = 1e-5);

// --- losses (scalar, mean-reduced) ----------------------------------------

Array mse(const Array& pred, const Array& target);
Array l1(const Array& pred, const Array& target);
// logp: (..., K) class log-probabilities, ids: one class index per row
Array nll(const Array& logp, const std::vector<int64_t>& ids);

// Fused op with a caller-supplied reverse rule. The closure reads
// node.grad and pushes adjoints into the inputs via detail::accumulate.
Array custom_op(Shape out_shape, std::vector<double> out_value,
                const std::vector<Array>& inputs,
                std::function<void(detail::Node&)> backward_fn);

// --- autodiff ---------------------------------------------------------------

// Reverse pass from a scalar root. Leaf gradients accumulate additively
// across calls; interior scratch is reset per call.
void backward(const Array& root);

// Max over all input coordinates of
// |analytic - central_difference| / max(1, |central_difference|).
double grad_check(const std::function<Array(std::vector<Array>&)>& f,
                  std::vector<Array>& inputs, double step = 1e-5);

}  // namespace mtk::nd
