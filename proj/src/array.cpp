#include "mtk/array.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mtk::nd {

namespace {

thread_local bool g_grad_enabled = true;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(Shape shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_finite_shape(const Shape& s) {
  for (int64_t d : s)
    if (d < 0) fail("negative extent in shape " + shape_str(s));
}

int64_t normalize_axis(int64_t axis, int64_t ndim) {
  if (axis < 0) axis += ndim;
  if (axis < 0 || axis >= ndim) fail("axis out of range");
  return axis;
}

std::vector<int64_t> row_strides(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (int64_t i = int64_t(s.size()) - 1; i >= 0; --i) {
    st[size_t(i)] = acc;
    acc *= s[size_t(i)];
  }
  return st;
}

// Broadcast plan for binary elementwise ops: result shape plus, per operand,
// strides with 0 on broadcast dimensions.
struct BroadcastPlan {
  Shape out;
  std::vector<int64_t> sa, sb;  // strides into a and b per out dimension
};

BroadcastPlan broadcast_plan(const Shape& a, const Shape& b) {
  size_t nd = std::max(a.size(), b.size());
  BroadcastPlan p;
  p.out.resize(nd);
  std::vector<int64_t> da(nd, 1), db(nd, 1);
  for (size_t i = 0; i < nd; ++i) {
    if (i < a.size()) da[nd - 1 - i] = a[a.size() - 1 - i];
    if (i < b.size()) db[nd - 1 - i] = b[b.size() - 1 - i];
  }
  for (size_t i = 0; i < nd; ++i) {
    if (da[i] == db[i]) p.out[i] = da[i];
    else if (da[i] == 1) p.out[i] = db[i];
    else if (db[i] == 1) p.out[i] = da[i];
    else fail("shapes not broadcastable: " + shape_str(a) + " vs " + shape_str(b));
  }
  auto full_strides = [&](const std::vector<int64_t>& dims) {
    std::vector<int64_t> st(nd);
    int64_t acc = 1;
    for (int64_t i = int64_t(nd) - 1; i >= 0; --i) {
      st[size_t(i)] = acc;
      acc *= dims[size_t(i)];
    }
    for (size_t i = 0; i < nd; ++i)
      if (dims[i] == 1 && p.out[i] != 1) st[i] = 0;
    return st;
  };
  p.sa = full_strides(da);
  p.sb = full_strides(db);
  return p;
}

// Walks every output index of the plan, handing linear offsets into a and b.
template <class F>
void broadcast_walk(const BroadcastPlan& p, F&& body) {
  int64_t total = numel(p.out);
  size_t nd = p.out.size();
  if (nd == 0) {
    body(0, 0, 0);
    return;
  }
  std::vector<int64_t> idx(nd, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t lin = 0; lin < total; ++lin) {
    body(lin, ia, ib);
    for (int64_t d = int64_t(nd) - 1; d >= 0; --d) {
      idx[size_t(d)]++;
      ia += p.sa[size_t(d)];
      ib += p.sb[size_t(d)];
      if (idx[size_t(d)] < p.out[size_t(d)]) break;
      ia -= p.sa[size_t(d)] * p.out[size_t(d)];
      ib -= p.sb[size_t(d)] * p.out[size_t(d)];
      idx[size_t(d)] = 0;
    }
  }
}

bool should_record(std::initializer_list<const Array*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Array* a : inputs)
    if (a->defined() && a->node()->needs_grad()) return true;
  return false;
}

Array wrap(NodePtr n) { return Array(std::move(n)); }

// Attaches parents + backward closure when recording is active.
Array finish(NodePtr result, std::initializer_list<const Array*> inputs,
             std::function<void(Node&)> bw) {
  if (should_record(inputs)) {
    for (const Array* a : inputs)
      if (a->defined()) result->parents.push_back(a->node());
    result->backward = std::move(bw);
  }
  return wrap(std::move(result));
}

void accum_into(const NodePtr& target, const std::vector<double>& g) {
  if (!target->needs_grad()) return;
  target->ensure_grad();
  for (size_t i = 0; i < g.size(); ++i) target->grad[i] += g[i];
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

namespace detail {

bool grad_enabled() { return g_grad_enabled; }

void accumulate(const NodePtr& node, const std::vector<double>& g) {
  accum_into(node, g);
}

}  // namespace detail

Array custom_op(Shape out_shape, std::vector<double> out_value,
                const std::vector<Array>& inputs,
                std::function<void(Node&)> backward_fn) {
  if (numel(out_shape) != int64_t(out_value.size()))
    fail("custom_op: value length does not match shape " + shape_str(out_shape));
  auto node = make_node(std::move(out_shape), std::move(out_value));
  bool record = g_grad_enabled;
  if (record) {
    bool any = false;
    for (const auto& in : inputs)
      if (in.defined() && in.node()->needs_grad()) any = true;
    record = any;
  }
  if (record) {
    for (const auto& in : inputs)
      if (in.defined()) node->parents.push_back(in.node());
    node->backward = std::move(backward_fn);
  }
  return wrap(std::move(node));
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// --- Array basics -----------------------------------------------------------

Array Array::zeros(Shape shape, bool rg) {
  check_finite_shape(shape);
  int64_t n = numel(shape);
  auto node = make_node(std::move(shape), std::vector<double>(size_t(n), 0.0));
  node->requires_grad = rg;
  return wrap(std::move(node));
}

Array Array::full(Shape shape, double v, bool rg) {
  check_finite_shape(shape);
  int64_t n = numel(shape);
  auto node = make_node(std::move(shape), std::vector<double>(size_t(n), v));
  node->requires_grad = rg;
  return wrap(std::move(node));
}

Array Array::from(Shape shape, std::vector<double> data, bool rg) {
  check_finite_shape(shape);
  if (numel(shape) != int64_t(data.size()))
    fail("data length " + std::to_string(data.size()) + " does not match shape " +
         shape_str(shape));
  auto node = make_node(std::move(shape), std::move(data));
  node->requires_grad = rg;
  return wrap(std::move(node));
}

Array Array::scalar(double v, bool rg) { return from({}, {v}, rg); }

Array Array::uniform(Shape shape, double lo, double hi, Rng& rng, bool rg) {
  int64_t n = numel(shape);
  std::vector<double> d(static_cast<size_t>(n));
  for (auto& x : d) x = rng.uniform(lo, hi);
  return from(std::move(shape), std::move(d), rg);
}

Array Array::normal(Shape shape, double mean, double stddev, Rng& rng, bool rg) {
  int64_t n = numel(shape);
  std::vector<double> d(static_cast<size_t>(n));
  for (auto& x : d) x = mean + stddev * rng.normal();
  return from(std::move(shape), std::move(d), rg);
}

int64_t Array::dim(int64_t i) const {
  int64_t nd = ndim();
  if (i < 0) i += nd;
  if (i < 0 || i >= nd) fail("dim index out of range");
  return node_->shape[size_t(i)];
}

double Array::item() const {
  if (size() != 1) fail("item() on non-scalar array of shape " + shape_str(shape()));
  return node_->value[0];
}

Array& Array::set_requires_grad(bool rg) {
  node_->requires_grad = rg;
  return *this;
}

const std::vector<double>& Array::grad() const {
  if (!has_grad()) fail("array has no gradient");
  return node_->grad;
}

std::vector<double>& Array::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Array::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

// --- elementwise binary -----------------------------------------------------

namespace {

enum class BinOp { Add, Sub, Mul, Div };

Array binary_op(BinOp op, const Array& a, const Array& b) {
  auto plan = broadcast_plan(a.shape(), b.shape());
  std::vector<double> out(static_cast<size_t>(numel(plan.out)));
  const auto& av = a.data();
  const auto& bv = b.data();
  switch (op) {
    case BinOp::Add:
      broadcast_walk(plan, [&](int64_t o, int64_t ia, int64_t ib) {
        out[size_t(o)] = av[size_t(ia)] + bv[size_t(ib)];
      });
      break;
    case BinOp::Sub:
      broadcast_walk(plan, [&](int64_t o, int64_t ia, int64_t ib) {
        out[size_t(o)] = av[size_t(ia)] - bv[size_t(ib)];
      });
      break;
    case BinOp::Mul:
      broadcast_walk(plan, [&](int64_t o, int64_t ia, int64_t ib) {
        out[size_t(o)] = av[size_t(ia)] * bv[size_t(ib)];
      });
      break;
    case BinOp::Div:
      broadcast_walk(plan, [&](int64_t o, int64_t ia, int64_t ib) {
        out[size_t(o)] = av[size_t(ia)] / bv[size_t(ib)];
      });
      break;
  }
  auto node = make_node(plan.out, std::move(out));
  auto an = a.node(), bn = b.node();
  return finish(std::move(node), {&a, &b}, [op, plan, an, bn](Node& self) {
    std::vector<double> ga, gb;
    bool wa = an->needs_grad(), wb = bn->needs_grad();
    if (wa) ga.assign(an->value.size(), 0.0);
    if (wb) gb.assign(bn->value.size(), 0.0);
    const auto& g = self.grad;
    broadcast_walk(plan, [&](int64_t o, int64_t ia, int64_t ib) {
      double gv = g[size_t(o)];
      switch (op) {
        case BinOp::Add:
          if (wa) ga[size_t(ia)] += gv;
          if (wb) gb[size_t(ib)] += gv;
          break;
        case BinOp::Sub:
          if (wa) ga[size_t(ia)] += gv;
          if (wb) gb[size_t(ib)] -= gv;
          break;
        case BinOp::Mul:
          if (wa) ga[size_t(ia)] += gv * bn->value[size_t(ib)];
          if (wb) gb[size_t(ib)] += gv * an->value[size_t(ia)];
          break;
        case BinOp::Div: {
          double bvv = bn->value[size_t(ib)];
          if (wa) ga[size_t(ia)] += gv / bvv;
          if (wb) gb[size_t(ib)] -= gv * an->value[size_t(ia)] / (bvv * bvv);
          break;
        }
      }
    });
    if (wa) accum_into(an, ga);
    if (wb) accum_into(bn, gb);
  });
}

}  // namespace

Array add(const Array& a, const Array& b) { return binary_op(BinOp::Add, a, b); }
Array sub(const Array& a, const Array& b) { return binary_op(BinOp::Sub, a, b); }
Array mul(const Array& a, const Array& b) { return binary_op(BinOp::Mul, a, b); }
Array div(const Array& a, const Array& b) { return binary_op(BinOp::Div, a, b); }

// --- elementwise unary ------------------------------------------------------

namespace {

// dy/dx supplied as a function of (x, y)
Array unary_op(const Array& a, double (*fwd)(double),
               double (*dfdx)(double, double)) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  auto node = make_node(a.shape(), std::move(out));
  auto an = a.node();
  return finish(std::move(node), {&a}, [an, dfdx](Node& self) {
    std::vector<double> g(an->value.size());
    for (size_t i = 0; i < g.size(); ++i)
      g[i] = self.grad[i] * dfdx(an->value[i], self.value[i]);
    accum_into(an, g);
  });
}

}  // namespace

Array neg(const Array& a) {
  return unary_op(a, [](double x) { return -x; },
                  [](double, double) { return -1.0; });
}

Array exp(const Array& a) {
  return unary_op(a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Array log(const Array& a) {
  return unary_op(a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Array sqrt(const Array& a) {
  return unary_op(a, [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}

Array abs(const Array& a) {
  return unary_op(a, [](double x) { return std::abs(x); },
                  [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Array silu(const Array& a) {
  return unary_op(a, [](double x) { return x * stable_sigmoid(x); },
                  [](double x, double) {
                    double s = stable_sigmoid(x);
                    return s * (1.0 + x * (1.0 - s));
                  });
}

Array softplus(const Array& a) {
  return unary_op(a, [](double x) { return stable_softplus(x); },
                  [](double x, double) { return stable_sigmoid(x); });
}

Array sigmoid(const Array& a) {
  return unary_op(a, [](double x) { return stable_sigmoid(x); },
                  [](double, double y) { return y * (1.0 - y); });
}

Array acos_clamped(const Array& a, double eps) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  double lo = -1.0 + eps, hi = 1.0 - eps;
  for (size_t i = 0; i < av.size(); ++i)
    out[i] = std::acos(std::clamp(av[i], lo, hi));
  auto node = make_node(a.shape(), std::move(out));
  auto an = a.node();
  return finish(std::move(node), {&a}, [an, lo, hi](Node& self) {
    std::vector<double> g(an->value.size());
    for (size_t i = 0; i < g.size(); ++i) {
      double x = an->value[i];
      if (x <= lo || x >= hi) {
        g[i] = 0.0;  // clamped region: flat
      } else {
        g[i] = self.grad[i] * (-1.0 / std::sqrt(1.0 - x * x));
      }
    }
    accum_into(an, g);
  });
}

namespace {

double phi1_val(double z) {
  if (std::abs(z) < 1e-4)
    return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
  return std::expm1(z) / z;
}

double phi1_deriv(double z) {
  if (std::abs(z) < 1e-4)
    return 0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0;
  return (std::exp(z) * (z - 1.0) + 1.0) / (z * z);
}

}  // namespace

Array phi1(const Array& a) {
  return unary_op(a, [](double x) { return phi1_val(x); },
                  [](double x, double) { return phi1_deriv(x); });
}

Array add_scalar(const Array& a, double c) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + c;
  auto node = make_node(a.shape(), std::move(out));
  auto an = a.node();
  return finish(std::move(node), {&a}, [an](Node& self) { accum_into(an, self.grad); });
}

Array mul_scalar(const Array& a, double c) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  auto node = make_node(a.shape(), std::move(out));
  auto an = a.node();
  return finish(std::move(node), {&a}, [an, c](Node& self) {
    std::vector<double> g(an->value.size());
    for (size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * c;
    accum_into(an, g);
  });
}

// --- reductions -------------------------------------------------------------

Array sum(const Array& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto node = make_node(Shape{}, {s});
  auto an = a.node();
  return finish(std::move(node), {&a}, [an](Node& self) {
    std::vector<double> g(an->value.size(), self.grad[0]);
    accum_into(an, g);
  });
}

Array mean(const Array& a) {
  int64_t n = a.size();
  if (n == 0) fail("mean of empty array");
  return mul_scalar(sum(a), 1.0 / double(n));
}

Array sum_axis(const Array& a, int64_t axis, bool keepdims) {
  axis = normalize_axis(axis, a.ndim());
  const Shape& s = a.shape();
  int64_t outer = 1, axis_n = s[size_t(axis)], inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= s[size_t(i)];
  for (int64_t i = axis + 1; i < a.ndim(); ++i) inner *= s[size_t(i)];
  Shape out_shape;
  for (int64_t i = 0; i < a.ndim(); ++i) {
    if (i == axis) {
      if (keepdims) out_shape.push_back(1);
    } else {
      out_shape.push_back(s[size_t(i)]);
    }
  }
  std::vector<double> out(size_t(outer * inner), 0.0);
  const auto& av = a.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t k = 0; k < axis_n; ++k) {
      const double* src = av.data() + (o * axis_n + k) * inner;
      double* dst = out.data() + o * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  auto node = make_node(std::move(out_shape), std::move(out));
  auto an = a.node();
  return finish(std::move(node), {&a}, [an, outer, axis_n, inner](Node& self) {
    std::vector<double> g(an->value.size());
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t k = 0; k < axis_n; ++k) {
        double* dst = g.data() + (o * axis_n + k) * inner;
        const double* src = self.grad.data() + o * inner;
        for (int64_t i = 0; i < inner; ++i) dst[i] = src[i];
      }
    accum_into(an, g);
  });
}

Array mean_axis(const Array& a, int64_t axis, bool keepdims) {
  int64_t n = a.dim(axis);
  return mul_scalar(sum_axis(a, axis, keepdims), 1.0 / double(n));
}

// --- movement ---------------------------------------------------------------

Array reshape(const Array& a, Shape shape) {
  // one extent may be -1 (inferred)
  int64_t known = 1, infer = -1;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) fail("reshape: more than one inferred extent");
      infer = int64_t(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || a.size() % known != 0)
      fail("reshape: cannot infer extent for " + shape_str(shape));
    shape[size_t(infer)] = a.size() / known;
  }
  if (numel(shape) != a.size())
    fail("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) +
         ": element count mismatch");
  auto node = make_node(std::move(shape), a.data());
  auto an = a.node();
  return finish(std::move(node), {&a}, [an](Node& self) { accum_into(an, self.grad); });
}

Array permute(const Array& a, const std::vector<int64_t>& axes) {
  int64_t nd = a.ndim();
  if (int64_t(axes.size()) != nd) fail("permute: axes size mismatch");
  std::vector<bool> seen(size_t(nd), false);
  Shape out_shape(static_cast<size_t>(nd));
  for (int64_t i = 0; i < nd; ++i) {
    int64_t ax = normalize_axis(axes[size_t(i)], nd);
    if (seen[size_t(ax)]) fail("permute: duplicate axis");
    seen[size_t(ax)] = true;
    out_shape[size_t(i)] = a.shape()[size_t(ax)];
  }
  auto in_strides = row_strides(a.shape());
  auto out_strides = row_strides(out_shape);
  int64_t total = a.size();
  std::vector<double> out(static_cast<size_t>(total));
  const auto& av = a.data();
  // out[i0,...,ik] = a[axes[i0],...]; map input index -> output offset
  std::vector<int64_t> inv(static_cast<size_t>(nd));
  for (int64_t i = 0; i < nd; ++i) inv[size_t(normalize_axis(axes[size_t(i)], nd))] = i;
  std::vector<int64_t> in_to_out_stride(static_cast<size_t>(nd));
  for (int64_t d = 0; d < nd; ++d) in_to_out_stride[size_t(d)] = out_strides[size_t(inv[size_t(d)])];
  std::vector<int64_t> idx(size_t(nd), 0);
  int64_t off_out = 0;
  for (int64_t lin = 0; lin < total; ++lin) {
    out[size_t(off_out)] = av[size_t(lin)];
    for (int64_t d = nd - 1; d >= 0; --d) {
      idx[size_t(d)]++;
      off_out += in_to_out_stride[size_t(d)];
      if (idx[size_t(d)] < a.shape()[size_t(d)]) break;
      off_out -= in_to_out_stride[size_t(d)] * a.shape()[size_t(d)];
      idx[size_t(d)] = 0;
    }
  }
  auto node = make_node(std::move(out_shape), std::move(out));
  auto an = a.node();
  auto ashape = a.shape();
  return finish(std::move(node), {&a}, [an, ashape, in_to_out_stride](Node& self) {
    int64_t nd2 = int64_t(ashape.size());
    int64_t total2 = int64_t(an->value.size());
    std::vector<double> g(an->value.size());
    std::vector<int64_t> idx2(size_t(nd2), 0);
    int64_t off = 0;
    for (int64_t lin = 0; lin < total2; ++lin) {
      g[size_t(lin)] = self.grad[size_t(off)];
      for (int64_t d = nd2 - 1; d >= 0; --d) {
        idx2[size_t(d)]++;
        off += in_to_out_stride[size_t(d)];
        if (idx2[size_t(d)] < ashape[size_t(d)]) break;
        off -= in_to_out_stride[size_t(d)] * ashape[size_t(d)];
        idx2[size_t(d)] = 0;
      }
    }
    accum_into(an, g);
  });
}

Array transpose2d(const Array& a) {
  int64_t nd = a.ndim();
  if (nd < 2) fail("transpose2d needs >= 2 dims");
  std::vector<int64_t> axes(static_cast<size_t>(nd));
  for (int64_t i = 0; i < nd; ++i) axes[size_t(i)] = i;
  std::swap(axes[size_t(nd - 1)], axes[size_t(nd - 2)]);
  return permute(a, axes);
}

Array concat(const std::vector<Array>& parts, int64_t axis) {
  if (parts.empty()) fail("concat of zero arrays");
  int64_t nd = parts[0].ndim();
  axis = normalize_axis(axis, nd);
  Shape out_shape = parts[0].shape();
  int64_t joined = 0;
  for (const auto& p : parts) {
    if (p.ndim() != nd) fail("concat: rank mismatch");
    for (int64_t d = 0; d < nd; ++d)
      if (d != axis && p.shape()[size_t(d)] != out_shape[size_t(d)])
        fail("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
             shape_str(out_shape));
    joined += p.shape()[size_t(axis)];
  }
  out_shape[size_t(axis)] = joined;
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= out_shape[size_t(d)];
  for (int64_t d = axis + 1; d < nd; ++d) inner *= out_shape[size_t(d)];
  std::vector<double> out(static_cast<size_t>(numel(out_shape)));
  int64_t dst_axis_off = 0;
  for (const auto& p : parts) {
    int64_t pa = p.shape()[size_t(axis)];
    const auto& pv = p.data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + o * pa * inner, pv.begin() + (o + 1) * pa * inner,
                out.begin() + (o * joined + dst_axis_off) * inner);
    dst_axis_off += pa;
  }
  auto node = make_node(std::move(out_shape), std::move(out));
  std::vector<NodePtr> in_nodes;
  std::vector<int64_t> sizes;
  bool any_grad = false;
  for (const auto& p : parts) {
    in_nodes.push_back(p.node());
    sizes.push_back(p.shape()[size_t(axis)]);
    if (p.node()->needs_grad()) any_grad = true;
  }
  if (!g_grad_enabled || !any_grad) return wrap(std::move(node));
  node->parents = in_nodes;
  node->backward = [in_nodes, sizes, outer, inner, joined](Node& self) {
    int64_t axis_off = 0;
    for (size_t k = 0; k < in_nodes.size(); ++k) {
      int64_t pa = sizes[k];
      if (in_nodes[k]->needs_grad()) {
        std::vector<double> g(static_cast<size_t>(outer * pa * inner));
        for (int64_t o = 0; o < outer; ++o)
          std::copy(self.grad.begin() + (o * joined + axis_off) * inner,
                    self.grad.begin() + (o * joined + axis_off + pa) * inner,
                    g.begin() + o * pa * inner);
        accum_into(in_nodes[k], g);
      }
      axis_off += pa;
    }
  };
  return wrap(std::move(node));
}

Array slice(const Array& a, int64_t axis, int64_t start, int64_t len) {
  int64_t nd = a.ndim();
  axis = normalize_axis(axis, nd);
  int64_t extent = a.shape()[size_t(axis)];
  if (start < 0 || len < 0 || start + len > extent)
    fail("slice [" + std::to_string(start) + "," + std::to_string(start + len) +
         ") out of range for axis extent " + std::to_string(extent));
  Shape out_shape = a.shape();
  out_shape[size_t(axis)] = len;
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= a.shape()[size_t(d)];
  for (int64_t d = axis + 1; d < nd; ++d) inner *= a.shape()[size_t(d)];
  std::vector<double> out(static_cast<size_t>(outer * len * inner));
  const auto& av = a.data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(av.begin() + (o * extent + start) * inner,
              av.begin() + (o * extent + start + len) * inner,
              out.begin() + o * len * inner);
  auto node = make_node(std::move(out_shape), std::move(out));
  auto an = a.node();
  return finish(std::move(node), {&a}, [an, outer, inner, extent, start, len](Node& self) {
    std::vector<double> g(an->value.size(), 0.0);
    for (int64_t o = 0; o < outer; ++o)
      std::copy(self.grad.begin() + o * len * inner,
                self.grad.begin() + (o + 1) * len * inner,
                g.begin() + (o * extent + start) * inner);
    accum_into(an, g);
  });
}

std::vector<Array> split(const Array& a, int64_t axis, const std::vector<int64_t>& sizes) {
  int64_t total = 0;
  for (int64_t s : sizes) total += s;
  if (total != a.dim(axis)) fail("split sizes do not cover axis");
  std::vector<Array> out;
  int64_t off = 0;
  for (int64_t s : sizes) {
    out.push_back(slice(a, axis, off, s));
    off += s;
  }
  return out;
}

Array repeat_interleave(const Array& a, int64_t axis, int64_t k) {
  int64_t nd = a.ndim();
  axis = normalize_axis(axis, nd);
  if (k < 1) fail("repeat_interleave: k must be >= 1");
  int64_t extent = a.shape()[size_t(axis)];
  Shape out_shape = a.shape();
  out_shape[size_t(axis)] = extent * k;
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= a.shape()[size_t(d)];
  for (int64_t d = axis + 1; d < nd; ++d) inner *= a.shape()[size_t(d)];
  std::vector<double> out(static_cast<size_t>(numel(out_shape)));
  const auto& av = a.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t t = 0; t < extent; ++t)
      for (int64_t r = 0; r < k; ++r)
        std::copy(av.begin() + (o * extent + t) * inner,
                  av.begin() + (o * extent + t + 1) * inner,
                  out.begin() + ((o * extent + t) * k + r) * inner);
  auto node = make_node(std::move(out_shape), std::move(out));
  auto an = a.node();
  return finish(std::move(node), {&a}, [an, outer, inner, extent, k](Node& self) {
    std::vector<double> g(an->value.size(), 0.0);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t t = 0; t < extent; ++t)
        for (int64_t r = 0; r < k; ++r) {
          const double* src = self.grad.data() + ((o * extent + t) * k + r) * inner;
          double* dst = g.data() + (o * extent + t) * inner;
          for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    accum_into(an, g);
  });
}

Array pool_mean(const Array& a, int64_t axis, int64_t out_len) {
  int64_t nd = a.ndim();
  axis = normalize_axis(axis, nd);
  if (out_len < 1) fail("pool_mean: out_len must be >= 1");
  int64_t extent = a.shape()[size_t(axis)];
  Shape out_shape = a.shape();
  out_shape[size_t(axis)] = out_len;
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= a.shape()[size_t(d)];
  for (int64_t d = axis + 1; d < nd; ++d) inner *= a.shape()[size_t(d)];
  // bucket t covers [floor(t*extent/out_len), floor((t+1)*extent/out_len)),
  // widened to at least one sample
  std::vector<int64_t> begin(static_cast<size_t>(out_len)), end(static_cast<size_t>(out_len));
  for (int64_t t = 0; t < out_len; ++t) {
    begin[size_t(t)] = t * extent / out_len;
    end[size_t(t)] = std::max(begin[size_t(t)] + 1, (t + 1) * extent / out_len);
    end[size_t(t)] = std::min(end[size_t(t)], extent);
    begin[size_t(t)] = std::min(begin[size_t(t)], extent - 1);
  }
  std::vector<double> out(size_t(outer * out_len * inner), 0.0);
  const auto& av = a.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t t = 0; t < out_len; ++t) {
      double inv = 1.0 / double(end[size_t(t)] - begin[size_t(t)]);
      double* dst = out.data() + (o * out_len + t) * inner;
      for (int64_t s = begin[size_t(t)]; s < end[size_t(t)]; ++s) {
        const double* src = av.data() + (o * extent + s) * inner;
        for (int64_t i = 0; i < inner; ++i) dst[i] += src[i] * inv;
      }
    }
  auto node = make_node(std::move(out_shape), std::move(out));
  auto an = a.node();
  return finish(std::move(node), {&a},
                [an, outer, inner, extent, out_len, begin, end](Node& self) {
    std::vector<double> g(an->value.size(), 0.0);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t t = 0; t < out_len; ++t) {
        double inv = 1.0 / double(end[size_t(t)] - begin[size_t(t)]);
        const double* src = self.grad.data() + (o * out_len + t) * inner;
        for (int64_t s = begin[size_t(t)]; s < end[size_t(t)]; ++s) {
          double* dst = g.data() + (o * extent + s) * inner;
          for (int64_t i = 0; i < inner; ++i) dst[i] += src[i] * inv;
        }
      }
    accum_into(an, g);
  });
}

Array gather_rows(const Array& table, const std::vector<int64_t>& ids) {
  if (table.ndim() != 2) fail("gather_rows expects a 2-D table");
  int64_t rows = table.dim(0), width = table.dim(1);
  for (int64_t id : ids)
    if (id < 0 || id >= rows)
      fail("row index " + std::to_string(id) + " out of range [0," +
           std::to_string(rows) + ")");
  std::vector<double> out(ids.size() * size_t(width));
  const auto& tv = table.data();
  for (size_t r = 0; r < ids.size(); ++r)
    std::copy(tv.begin() + ids[r] * width, tv.begin() + (ids[r] + 1) * width,
              out.begin() + int64_t(r) * width);
  auto node = make_node(Shape{int64_t(ids.size()), width}, std::move(out));
  auto tn = table.node();
  return finish(std::move(node), {&table}, [tn, ids, width](Node& self) {
    std::vector<double> g(tn->value.size(), 0.0);
    for (size_t r = 0; r < ids.size(); ++r) {
      const double* src = self.grad.data() + int64_t(r) * width;
      double* dst = g.data() + ids[r] * width;
      for (int64_t i = 0; i < width; ++i) dst[i] += src[i];
    }
    accum_into(tn, g);
  });
}

Array detach(const Array& a) {
  auto node = make_node(a.shape(), a.data());
  return wrap(std::move(node));
}

// --- linear algebra -----------------------------------------------------------

Array matmul(const Array& a, const Array& b) {
  if (a.ndim() < 2 || b.ndim() < 2) fail("matmul expects >= 2-D operands");
  if (a.ndim() != b.ndim())
    fail("matmul rank mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  int64_t nd = a.ndim();
  int64_t m = a.shape()[size_t(nd - 2)], ka = a.shape()[size_t(nd - 1)];
  int64_t kb = b.shape()[size_t(nd - 2)], n = b.shape()[size_t(nd - 1)];
  if (ka != kb)
    fail("matmul inner dimension mismatch: " + shape_str(a.shape()) + " x " +
         shape_str(b.shape()));
  int64_t batch = 1;
  Shape out_shape;
  for (int64_t d = 0; d < nd - 2; ++d) {
    if (a.shape()[size_t(d)] != b.shape()[size_t(d)])
      fail("matmul batch dims differ: " + shape_str(a.shape()) + " x " +
           shape_str(b.shape()));
    batch *= a.shape()[size_t(d)];
    out_shape.push_back(a.shape()[size_t(d)]);
  }
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(size_t(batch * m * n), 0.0);
  const auto& av = a.data();
  const auto& bv = b.data();
  for (int64_t g = 0; g < batch; ++g) {
    const double* A = av.data() + g * m * ka;
    const double* B = bv.data() + g * ka * n;
    double* C = out.data() + g * m * n;
    for (int64_t i = 0; i < m; ++i)
      for (int64_t k = 0; k < ka; ++k) {
        double aik = A[i * ka + k];
        const double* Bk = B + k * n;
        double* Ci = C + i * n;
        for (int64_t j = 0; j < n; ++j) Ci[j] += aik * Bk[j];
      }
  }
  auto node = make_node(std::move(out_shape), std::move(out));
  auto an = a.node(), bn = b.node();
  return finish(std::move(node), {&a, &b}, [an, bn, batch, m, n, ka](Node& self) {
    // dA = dC * B^T ; dB = A^T * dC
    if (an->needs_grad()) {
      std::vector<double> g(an->value.size(), 0.0);
      for (int64_t gidx = 0; gidx < batch; ++gidx) {
        const double* dC = self.grad.data() + gidx * m * n;
        const double* B = bn->value.data() + gidx * ka * n;
        double* dA = g.data() + gidx * m * ka;
        for (int64_t i = 0; i < m; ++i)
          for (int64_t k = 0; k < ka; ++k) {
            double acc = 0.0;
            const double* dCi = dC + i * n;
            const double* Bk = B + k * n;
            for (int64_t j = 0; j < n; ++j) acc += dCi[j] * Bk[j];
            dA[i * ka + k] = acc;
          }
      }
      accum_into(an, g);
    }
    if (bn->needs_grad()) {
      std::vector<double> g(bn->value.size(), 0.0);
      for (int64_t gidx = 0; gidx < batch; ++gidx) {
        const double* dC = self.grad.data() + gidx * m * n;
        const double* A = an->value.data() + gidx * m * ka;
        double* dB = g.data() + gidx * ka * n;
        for (int64_t i = 0; i < m; ++i) {
          const double* dCi = dC + i * n;
          for (int64_t k = 0; k < ka; ++k) {
            double aik = A[i * ka + k];
            double* dBk = dB + k * n;
            for (int64_t j = 0; j < n; ++j) dBk[j] += aik * dCi[j];
          }
        }
      }
      accum_into(bn, g);
    }
  });
}

Array linear(const Array& x, const Array& w, const Array& b) {
  if (w.ndim() != 2) fail("linear weight must be 2-D (in,out)");
  int64_t in_dim = w.dim(0), out_dim = w.dim(1);
  if (x.dim(-1) != in_dim)
    fail("linear: input width " + std::to_string(x.dim(-1)) +
         " does not match weight " + shape_str(w.shape()));
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != out_dim))
    fail("linear: bias shape mismatch");
  int64_t rows = x.size() / in_dim;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  std::vector<double> out(size_t(rows * out_dim), 0.0);
  const auto& xv = x.data();
  const auto& wv = w.data();
  if (b.defined()) {
    const auto& bv = b.data();
    for (int64_t r = 0; r < rows; ++r)
      std::copy(bv.begin(), bv.end(), out.begin() + r * out_dim);
  }
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * in_dim;
    double* yr = out.data() + r * out_dim;
    for (int64_t i = 0; i < in_dim; ++i) {
      double xi = xr[i];
      const double* wi = wv.data() + i * out_dim;
      for (int64_t j = 0; j < out_dim; ++j) yr[j] += xi * wi[j];
    }
  }
  auto node = make_node(std::move(out_shape), std::move(out));
  auto xn = x.node(), wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  Array result;
  if (b.defined())
    result = finish(std::move(node), {&x, &w, &b}, nullptr);
  else
    result = finish(std::move(node), {&x, &w}, nullptr);
  if (!result.node()->parents.empty() || result.node()->backward) {
    result.node()->backward = [xn, wn, bn, rows, in_dim, out_dim](Node& self) {
      if (xn->needs_grad()) {
        std::vector<double> g(xn->value.size(), 0.0);
        for (int64_t r = 0; r < rows; ++r) {
          const double* gy = self.grad.data() + r * out_dim;
          double* gx = g.data() + r * in_dim;
          for (int64_t i = 0; i < in_dim; ++i) {
            const double* wi = wn->value.data() + i * out_dim;
            double acc = 0.0;
            for (int64_t j = 0; j < out_dim; ++j) acc += gy[j] * wi[j];
            gx[i] = acc;
          }
        }
        accum_into(xn, g);
      }
      if (wn->needs_grad()) {
        std::vector<double> g(wn->value.size(), 0.0);
        for (int64_t r = 0; r < rows; ++r) {
          const double* gy = self.grad.data() + r * out_dim;
          const double* xr = xn->value.data() + r * in_dim;
          for (int64_t i = 0; i < in_dim; ++i) {
            double xi = xr[i];
            double* gw = g.data() + i * out_dim;
            for (int64_t j = 0; j < out_dim; ++j) gw[j] += xi * gy[j];
          }
        }
        accum_into(wn, g);
      }
      if (bn && bn->needs_grad()) {
        std::vector<double> g(bn->value.size(), 0.0);
        for (int64_t r = 0; r < rows; ++r) {
          const double* gy = self.grad.data() + r * out_dim;
          for (int64_t j = 0; j < out_dim; ++j) g[size_t(j)] += gy[j];
        }
        accum_into(bn, g);
      }
    };
  }
  return result;
}

Array conv1d(const Array& x, const Array& w, const Array& b, int64_t stride,
             int64_t pad_l, int64_t pad_r) {
  if (x.ndim() != 3) fail("conv1d input must be (B, T, Cin)");
  if (w.ndim() != 3) fail("conv1d weight must be (K, Cin, Cout)");
  if (stride < 1 || pad_l < 0 || pad_r < 0) fail("conv1d: bad stride/padding");
  int64_t B = x.dim(0), T = x.dim(1), cin = x.dim(2);
  int64_t K = w.dim(0), wcin = w.dim(1), cout = w.dim(2);
  if (cin != wcin)
    fail("conv1d channel mismatch: input " + shape_str(x.shape()) + " weight " +
         shape_str(w.shape()));
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != cout)) fail("conv1d: bias shape mismatch");
  int64_t t_out = (T + pad_l + pad_r - K) / stride + 1;
  if (T + pad_l + pad_r < K) fail("conv1d: kernel longer than padded input");
  std::vector<double> out(size_t(B * t_out * cout), 0.0);
  const auto& xv = x.data();
  const auto& wv = w.data();
  if (b.defined()) {
    const auto& bv = b.data();
    for (int64_t r = 0; r < B * t_out; ++r)
      std::copy(bv.begin(), bv.end(), out.begin() + r * cout);
  }
  for (int64_t bi = 0; bi < B; ++bi)
    for (int64_t t = 0; t < t_out; ++t) {
      double* y = out.data() + (bi * t_out + t) * cout;
      for (int64_t k = 0; k < K; ++k) {
        int64_t src_t = t * stride - pad_l + k;
        if (src_t < 0 || src_t >= T) continue;
        const double* xr = xv.data() + (bi * T + src_t) * cin;
        const double* wk = wv.data() + k * cin * cout;
        for (int64_t ci = 0; ci < cin; ++ci) {
          double xi = xr[ci];
          const double* wrow = wk + ci * cout;
          for (int64_t co = 0; co < cout; ++co) y[co] += xi * wrow[co];
        }
      }
    }
  auto node = make_node(Shape{B, t_out, cout}, std::move(out));
  auto xn = x.node(), wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  Array result;
  if (b.defined())
    result = finish(std::move(node), {&x, &w, &b}, nullptr);
  else
    result = finish(std::move(node), {&x, &w}, nullptr);
  if (!result.node()->parents.empty()) {
    result.node()->backward = [xn, wn, bn, B, T, cin, K, cout, t_out, stride,
                               pad_l](Node& self) {
      if (xn->needs_grad()) {
        std::vector<double> g(xn->value.size(), 0.0);
        for (int64_t bi = 0; bi < B; ++bi)
          for (int64_t t = 0; t < t_out; ++t) {
            const double* gy = self.grad.data() + (bi * t_out + t) * cout;
            for (int64_t k = 0; k < K; ++k) {
              int64_t src_t = t * stride - pad_l + k;
              if (src_t < 0 || src_t >= T) continue;
              double* gx = g.data() + (bi * T + src_t) * cin;
              const double* wk = wn->value.data() + k * cin * cout;
              for (int64_t ci = 0; ci < cin; ++ci) {
                const double* wrow = wk + ci * cout;
                double acc = 0.0;
                for (int64_t co = 0; co < cout; ++co) acc += gy[co] * wrow[co];
                gx[ci] += acc;
              }
            }
          }
        accum_into(xn, g);
      }
      if (wn->needs_grad()) {
        std::vector<double> g(wn->value.size(), 0.0);
        for (int64_t bi = 0; bi < B; ++bi)
          for (int64_t t = 0; t < t_out; ++t) {
            const double* gy = self.grad.data() + (bi * t_out + t) * cout;
            for (int64_t k = 0; k < K; ++k) {
              int64_t src_t = t * stride - pad_l + k;
              if (src_t < 0 || src_t >= T) continue;
              const double* xr = xn->value.data() + (bi * T + src_t) * cin;
              double* gw = g.data() + k * cin * cout;
              for (int64_t ci = 0; ci < cin; ++ci) {
                double xi = xr[ci];
                double* gwrow = gw + ci * cout;
                for (int64_t co = 0; co < cout; ++co) gwrow[co] += xi * gy[co];
              }
            }
          }
        accum_into(wn, g);
      }
      if (bn && bn->needs_grad()) {
        std::vector<double> g(bn->value.size(), 0.0);
        for (int64_t r = 0; r < B * t_out; ++r) {
          const double* gy = self.grad.data() + r * cout;
          for (int64_t co = 0; co < cout; ++co) g[size_t(co)] += gy[co];
        }
        accum_into(bn, g);
      }
    };
  }
  return result;
}

namespace {

struct AxisView {
  int64_t outer, n, inner;
};

AxisView axis_view(const Shape& s, int64_t axis) {
  AxisView v{1, s[size_t(axis)], 1};
  for (int64_t d = 0; d < axis; ++d) v.outer *= s[size_t(d)];
  for (int64_t d = axis + 1; d < int64_t(s.size()); ++d) v.inner *= s[size_t(d)];
  return v;
}

}  // namespace

Array softmax(const Array& a, int64_t axis) {
  axis = normalize_axis(axis, a.ndim());
  if (a.shape()[size_t(axis)] == 0) fail("softmax over zero-length axis");
  auto v = axis_view(a.shape(), axis);
  std::vector<double> out(a.data().size());
  const auto& av = a.data();
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t i = 0; i < v.inner; ++i) {
      double mx = -1e300;
      for (int64_t k = 0; k < v.n; ++k)
        mx = std::max(mx, av[size_t((o * v.n + k) * v.inner + i)]);
      double denom = 0.0;
      for (int64_t k = 0; k < v.n; ++k) {
        double e = std::exp(av[size_t((o * v.n + k) * v.inner + i)] - mx);
        out[size_t((o * v.n + k) * v.inner + i)] = e;
        denom += e;
      }
      for (int64_t k = 0; k < v.n; ++k)
        out[size_t((o * v.n + k) * v.inner + i)] /= denom;
    }
  auto node = make_node(a.shape(), std::move(out));
  auto an = a.node();
  return finish(std::move(node), {&a}, [an, v](Node& self) {
    std::vector<double> g(an->value.size());
    for (int64_t o = 0; o < v.outer; ++o)
      for (int64_t i = 0; i < v.inner; ++i) {
        double dot = 0.0;
        for (int64_t k = 0; k < v.n; ++k) {
          size_t idx = size_t((o * v.n + k) * v.inner + i);
          dot += self.grad[idx] * self.value[idx];
        }
        for (int64_t k = 0; k < v.n; ++k) {
          size_t idx = size_t((o * v.n + k) * v.inner + i);
          g[idx] = self.value[idx] * (self.grad[idx] - dot);
        }
      }
    accum_into(an, g);
  });
}

Array log_softmax(const Array& a, int64_t axis) {
  axis = normalize_axis(axis, a.ndim());
  if (a.shape()[size_t(axis)] == 0) fail("log_softmax over zero-length axis");
  auto v = axis_view(a.shape(), axis);
  std::vector<double> out(a.data().size());
  const auto& av = a.data();
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t i = 0; i < v.inner; ++i) {
      double mx = -1e300;
      for (int64_t k = 0; k < v.n; ++k)
        mx = std::max(mx, av[size_t((o * v.n + k) * v.inner + i)]);
      double denom = 0.0;
      for (int64_t k = 0; k < v.n; ++k)
        denom += std::exp(av[size_t((o * v.n + k) * v.inner + i)] - mx);
      double lse = mx + std::log(denom);
      for (int64_t k = 0; k < v.n; ++k) {
        size_t idx = size_t((o * v.n + k) * v.inner + i);
        out[idx] = av[idx] - lse;
      }
    }
  auto node = make_node(a.shape(), std::move(out));
  auto an = a.node();
  return finish(std::move(node), {&a}, [an, v](Node& self) {
    std::vector<double> g(an->value.size());
    for (int64_t o = 0; o < v.outer; ++o)
      for (int64_t i = 0; i < v.inner; ++i) {
        double gsum = 0.0;
        for (int64_t k = 0; k < v.n; ++k)
          gsum += self.grad[size_t((o * v.n + k) * v.inner + i)];
        for (int64_t k = 0; k < v.n; ++k) {
          size_t idx = size_t((o * v.n + k) * v.inner + i);
          g[idx] = self.grad[idx] - std::exp(self.value[idx]) * gsum;
        }
      }
    accum_into(an, g);
  });
}

Array layer_norm(const Array& x, const Array& gamma, const Array& beta, double eps) {
  int64_t c = x.dim(-1);
  if (gamma.defined() && (gamma.ndim() != 1 || gamma.dim(0) != c)) fail("layer_norm: gamma shape");
  if (beta.defined() && (beta.ndim() != 1 || beta.dim(0) != c)) fail("layer_norm: beta shape");
  int64_t rows = x.size() / c;
  std::vector<double> out(x.data().size());
  std::vector<double> inv_std(static_cast<size_t>(rows)), mu(static_cast<size_t>(rows));
  const auto& xv = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * c;
    double m = 0.0;
    for (int64_t i = 0; i < c; ++i) m += xr[i];
    m /= double(c);
    double var = 0.0;
    for (int64_t i = 0; i < c; ++i) var += (xr[i] - m) * (xr[i] - m);
    var /= double(c);
    double is = 1.0 / std::sqrt(var + eps);
    mu[size_t(r)] = m;
    inv_std[size_t(r)] = is;
    double* yr = out.data() + r * c;
    for (int64_t i = 0; i < c; ++i) {
      double h = (xr[i] - m) * is;
      if (gamma.defined()) h *= gamma.data()[size_t(i)];
      if (beta.defined()) h += beta.data()[size_t(i)];
      yr[i] = h;
    }
  }
  auto node = make_node(x.shape(), std::move(out));
  auto xn = x.node();
  auto gn = gamma.defined() ? gamma.node() : nullptr;
  auto bn = beta.defined() ? beta.node() : nullptr;
  Array result;
  if (gamma.defined() && beta.defined())
    result = finish(std::move(node), {&x, &gamma, &beta}, nullptr);
  else if (gamma.defined())
    result = finish(std::move(node), {&x, &gamma}, nullptr);
  else
    result = finish(std::move(node), {&x}, nullptr);
  if (!result.node()->parents.empty()) {
    result.node()->backward = [xn, gn, bn, rows, c, mu, inv_std](Node& self) {
      std::vector<double> gx, gg, gb;
      bool wx = xn->needs_grad();
      bool wg = gn && gn->needs_grad();
      bool wb = bn && bn->needs_grad();
      if (wx) gx.assign(xn->value.size(), 0.0);
      if (wg) gg.assign(size_t(c), 0.0);
      if (wb) gb.assign(size_t(c), 0.0);
      for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xn->value.data() + r * c;
        const double* gy = self.grad.data() + r * c;
        double m = mu[size_t(r)], is = inv_std[size_t(r)];
        // dh = gy * gamma; dx = is*(dh - mean(dh) - h*mean(dh*h))
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (int64_t i = 0; i < c; ++i) {
          double h = (xr[i] - m) * is;
          double dh = gy[i] * (gn ? gn->value[size_t(i)] : 1.0);
          mean_dh += dh;
          mean_dh_h += dh * h;
          if (wg) gg[size_t(i)] += gy[i] * h;
          if (wb) gb[size_t(i)] += gy[i];
        }
        mean_dh /= double(c);
        mean_dh_h /= double(c);
        if (wx) {
          double* gxr = gx.data() + r * c;
          for (int64_t i = 0; i < c; ++i) {
            double h = (xr[i] - m) * is;
            double dh = gy[i] * (gn ? gn->value[size_t(i)] : 1.0);
            gxr[i] = is * (dh - mean_dh - h * mean_dh_h);
          }
        }
      }
      if (wx) accum_into(xn, gx);
      if (wg) accum_into(gn, gg);
      if (wb) accum_into(bn, gb);
    };
  }
  return result;
}

// --- losses -----------------------------------------------------------------

namespace {

void check_same_shape(const Array& a, const Array& b, const char* what) {
  if (a.shape() != b.shape())
    fail(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
}

}  // namespace

Array mse(const Array& pred, const Array& target) {
  check_same_shape(pred, target, "mse");
  Array d = sub(pred, target);
  return mean(mul(d, d));
}

Array l1(const Array& pred, const Array& target) {
  check_same_shape(pred, target, "l1");
  return mean(abs(sub(pred, target)));
}

Array nll(const Array& logp, const std::vector<int64_t>& ids) {
  if (logp.ndim() < 1) fail("nll expects at least 1-D log-probabilities");
  int64_t k = logp.dim(-1);
  int64_t rows = logp.size() / k;
  if (int64_t(ids.size()) != rows)
    fail("nll: got " + std::to_string(ids.size()) + " targets for " +
         std::to_string(rows) + " rows");
  for (int64_t id : ids)
    if (id < 0 || id >= k)
      fail("nll: class index " + std::to_string(id) + " out of range [0," +
           std::to_string(k) + ")");
  const auto& lv = logp.data();
  double acc = 0.0;
  for (int64_t r = 0; r < rows; ++r) acc -= lv[size_t(r * k + ids[size_t(r)])];
  acc /= double(rows);
  auto node = make_node(Shape{}, {acc});
  auto ln = logp.node();
  return finish(std::move(node), {&logp}, [ln, ids, k, rows](Node& self) {
    std::vector<double> g(ln->value.size(), 0.0);
    double s = self.grad[0] / double(rows);
    for (int64_t r = 0; r < rows; ++r) g[size_t(r * k + ids[size_t(r)])] -= s;
    accum_into(ln, g);
  });
}

// --- backward ---------------------------------------------------------------

void backward(const Array& root) {
  if (!root.defined()) fail("backward on undefined array");
  if (root.size() != 1)
    fail("backward root must be scalar, got shape " + shape_str(root.shape()));
  auto rn = root.node();

  // iterative DFS postorder over parents
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  if (visited.insert(rn.get()).second) stack.push_back({rn.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      Node* p = f.n->parents[f.next_parent++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      topo.push_back(f.n);
      stack.pop_back();
    }
  }
  // topo is now in postorder: parents before children; reverse gives root-first

  // reset interior scratch, keep leaf accumulators
  for (Node* n : topo) {
    if (n->backward) {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  rn->ensure_grad();
  rn->grad[0] += 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

double grad_check(const std::function<Array(std::vector<Array>&)>& f,
                  std::vector<Array>& inputs, double step) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  Array y = f(inputs);
  if (y.size() != 1) fail("grad_check: function must be scalar-valued");
  backward(y);
  std::vector<std::vector<double>> analytic;
  for (auto& in : inputs)
    analytic.push_back(in.has_grad() ? in.grad() : std::vector<double>(size_t(in.size()), 0.0));

  double worst = 0.0;
  NoGradGuard guard;
  for (size_t p = 0; p < inputs.size(); ++p) {
    auto& vals = inputs[p].mutable_data();
    for (size_t i = 0; i < vals.size(); ++i) {
      double keep = vals[i];
      vals[i] = keep + step;
      double up = f(inputs).item();
      vals[i] = keep - step;
      double down = f(inputs).item();
      vals[i] = keep;
      double central = (up - down) / (2.0 * step);
      double err = std::abs(analytic[p][i] - central) / std::max(1.0, std::abs(central));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace mtk::nd
