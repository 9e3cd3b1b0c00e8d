#include "overlapgan/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

namespace ogan {

Index shape_size(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << "]";
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  std::vector<Tensor> inputs;
  std::function<std::vector<Tensor>(const Tensor& self, const Tensor& gout)> vjp;
  std::vector<double> grad_accum;
};

}  // namespace detail

using detail::Node;

namespace {

thread_local bool g_recording = true;

using VjpFn =
    std::function<std::vector<Tensor>(const Tensor& self, const Tensor& gout)>;

Tensor make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (static_cast<Index>(values.size()) != shape_size(shape)) {
    throw ShapeError("tensor: value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor make_op(Shape shape, std::vector<double> values,
               std::vector<Tensor> inputs, VjpFn vjp) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  if (g_recording) {
    bool track = false;
    for (const auto& t : inputs) track = track || t.requires_grad();
    if (track) {
      n->requires_grad = true;
      n->inputs = std::move(inputs);
      n->vjp = std::move(vjp);
    }
  }
  return Tensor(std::move(n));
}

bool is_matrix(const Tensor& t) { return t.shape().size() == 2; }

void require_matrix(const Tensor& t, const char* op) {
  if (!is_matrix(t)) {
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " +
                     shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

Tensor unary_map(const Tensor& a, double (*f)(double), VjpFn vjp) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = f(v);
  return make_op(a.shape(), std::move(out), {a}, std::move(vjp));
}

}  // namespace

// ---- Tensor basics ----

Tensor Tensor::scalar(double v, bool requires_grad) {
  return make_leaf(Shape{}, {v}, requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  return make_leaf(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(static_cast<size_t>(shape_size(shape)), 0.0);
  return make_leaf(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(static_cast<size_t>(shape_size(shape)), value);
  return make_leaf(std::move(shape), std::move(v), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
Index Tensor::size() const { return static_cast<Index>(node_->value.size()); }

Index Tensor::rows() const {
  require_matrix(*this, "rows");
  return node_->shape[0];
}

Index Tensor::cols() const {
  require_matrix(*this, "cols");
  return node_->shape[1];
}

std::span<const double> Tensor::values() const { return node_->value; }

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item: tensor of shape " + shape_str(shape()) +
                     " is not a scalar");
  }
  return node_->value[0];
}

double Tensor::at(Index i) const { return node_->value[static_cast<size_t>(i)]; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor Tensor::detach() const {
  return make_leaf(node_->shape, node_->value, false);
}

bool Tensor::has_grad() const { return node_ && !node_->grad_accum.empty(); }

std::span<const double> Tensor::grad() const { return node_->grad_accum; }

void Tensor::zero_grad() { node_->grad_accum.clear(); }

std::span<double> Tensor::mutable_values() { return node_->value; }

NoGradGuard::NoGradGuard() : prev_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = prev_; }
bool grad_recording_enabled() { return g_recording; }

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ: " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const Index n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(static_cast<size_t>(n * m));
  {
    ConstMap A(a.values().data(), n, k), B(b.values().data(), k, m);
    Map O(out.data(), n, m);
    O.noalias() = A * B;
  }
  return make_op(
      {n, m}, std::move(out), {a, b},
      [a, b](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
        return {matmul(gout, transpose(b)), matmul(transpose(a), gout)};
      });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const Index n = a.rows(), m = a.cols();
  std::vector<double> out(static_cast<size_t>(n * m));
  {
    ConstMap A(a.values().data(), n, m);
    Map O(out.data(), m, n);
    O = A.transpose();
  }
  return make_op({m, n}, std::move(out), {a},
                 [](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   return {transpose(gout)};
                 });
}

Tensor add(const Tensor& a, const Tensor& b) {
  // Scalar addend on either side.
  if (b.shape().empty() || a.shape().empty()) {
    const Tensor& big = b.shape().empty() ? a : b;
    const Tensor& sc = b.shape().empty() ? b : a;
    std::vector<double> out(big.values().begin(), big.values().end());
    const double s = sc.item();
    for (double& v : out) v += s;
    bool a_is_big = b.shape().empty();
    return make_op(big.shape(), std::move(out), {a, b},
                   [a_is_big](const Tensor&, const Tensor& gout)
                       -> std::vector<Tensor> {
                     Tensor gbig = gout;
                     Tensor gsc = sum_all(gout);
                     if (a_is_big) return {gbig, gsc};
                     return {gsc, gbig};
                   });
  }
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.values().begin(), a.values().end());
    auto bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_op(a.shape(), std::move(out), {a, b},
                   [](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                     return {gout, gout};
                   });
  }
  // Row bias: (n x m) + (1 x m), either order.
  if (is_matrix(a) && is_matrix(b) && a.cols() == b.cols() &&
      (a.rows() == 1 || b.rows() == 1)) {
    const bool bias_is_b = (b.rows() == 1);
    const Tensor& big = bias_is_b ? a : b;
    const Tensor& bias = bias_is_b ? b : a;
    const Index n = big.rows(), m = big.cols();
    std::vector<double> out(big.values().begin(), big.values().end());
    auto bv = bias.values();
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j)
        out[static_cast<size_t>(i * m + j)] += bv[static_cast<size_t>(j)];
    return make_op(big.shape(), std::move(out), {a, b},
                   [bias_is_b](const Tensor&, const Tensor& gout)
                       -> std::vector<Tensor> {
                     Tensor gbig = gout;
                     Tensor gbias = sum_axis(gout, 0);
                     if (bias_is_b) return {gbig, gbias};
                     return {gbias, gbig};
                   });
  }
  throw ShapeError("add: incompatible shapes " + shape_str(a.shape()) +
                   " vs " + shape_str(b.shape()));
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_op(a.shape(), std::move(out), {a, b},
                 [a, b](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   return {mul(gout, b), mul(gout, a)};
                 });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
  return make_op(a.shape(), std::move(out), {a, b},
                 [a, b](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   Tensor ga = div(gout, b);
                   Tensor gb = neg(div(mul(gout, a), mul(b, b)));
                   return {ga, gb};
                 });
}

Tensor affine(const Tensor& a, double scale, double shift) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = scale * v + shift;
  return make_op(a.shape(), std::move(out), {a},
                 [scale](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   return {affine(gout, scale, 0.0)};
                 });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return make_op(a.shape(), std::move(out), {a},
                 [a](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   auto av = a.values();
                   std::vector<double> mask(av.size());
                   for (size_t i = 0; i < mask.size(); ++i)
                     mask[i] = av[i] > 0.0 ? 1.0 : 0.0;
                   return {mul(gout, Tensor::from(a.shape(), std::move(mask)))};
                 });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = v > 0.0 ? v : slope * v;
  return make_op(a.shape(), std::move(out), {a},
                 [a, slope](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   auto av = a.values();
                   std::vector<double> mask(av.size());
                   for (size_t i = 0; i < mask.size(); ++i)
                     mask[i] = av[i] > 0.0 ? 1.0 : slope;
                   return {mul(gout, Tensor::from(a.shape(), std::move(mask)))};
                 });
}

Tensor tanh(const Tensor& a) {
  return unary_map(
      a, [](double v) { return std::tanh(v); },
      [](const Tensor& self, const Tensor& gout) -> std::vector<Tensor> {
        // d tanh = 1 - tanh^2
        return {mul(gout, affine(mul(self, self), -1.0, 1.0))};
      });
}

Tensor exp(const Tensor& a) {
  return unary_map(
      a, [](double v) { return std::exp(v); },
      [](const Tensor& self, const Tensor& gout) -> std::vector<Tensor> {
        return {mul(gout, self)};
      });
}

Tensor log(const Tensor& a) {
  return unary_map(
      a, [](double v) { return std::log(v); },
      [](const Tensor& self, const Tensor& gout) -> std::vector<Tensor> {
        return {div(gout, self.node()->inputs[0])};
      });
}

Tensor sqrt(const Tensor& a) {
  return unary_map(
      a, [](double v) { return std::sqrt(v); },
      [](const Tensor& self, const Tensor& gout) -> std::vector<Tensor> {
        return {div(gout, affine(self, 2.0, 0.0))};
      });
}

Tensor sigmoid(const Tensor& a) {
  return unary_map(
      a,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](const Tensor& self, const Tensor& gout) -> std::vector<Tensor> {
        return {mul(gout, mul(self, affine(self, -1.0, 1.0)))};
      });
}

Tensor softplus(const Tensor& a) {
  return unary_map(
      a,
      [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](const Tensor& self, const Tensor& gout) -> std::vector<Tensor> {
        return {mul(gout, sigmoid(self.node()->inputs[0]))};
      });
}

Tensor softmax_rows(const Tensor& a) {
  require_matrix(a, "softmax_rows");
  const Index n = a.rows(), m = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  for (Index i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    double mx = *std::max_element(row, row + m);
    double sum = 0.0;
    for (Index j = 0; j < m; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (Index j = 0; j < m; ++j) row[j] /= sum;
  }
  return make_op(a.shape(), std::move(out), {a},
                 [m](const Tensor& self, const Tensor& gout) -> std::vector<Tensor> {
                   Tensor dot = sum_axis(mul(gout, self), 1);
                   return {mul(self, sub(gout, broadcast_axis(dot, 1, m)))};
                 });
}

Tensor log_softmax_rows(const Tensor& a) {
  require_matrix(a, "log_softmax_rows");
  const Index n = a.rows(), m = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  for (Index i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    double mx = *std::max_element(row, row + m);
    double sum = 0.0;
    for (Index j = 0; j < m; ++j) sum += std::exp(row[j] - mx);
    double lse = mx + std::log(sum);
    for (Index j = 0; j < m; ++j) row[j] -= lse;
  }
  return make_op(a.shape(), std::move(out), {a},
                 [m](const Tensor& self, const Tensor& gout) -> std::vector<Tensor> {
                   Tensor p = exp(self);
                   Tensor rowsum = sum_axis(gout, 1);
                   return {sub(gout, mul(p, broadcast_axis(rowsum, 1, m)))};
                 });
}

namespace {

// Expansion of a scalar to an arbitrary shape; vjp is sum_all.
Tensor broadcast_scalar(const Tensor& s, const Shape& shape) {
  std::vector<double> out(static_cast<size_t>(shape_size(shape)), s.item());
  return make_op(shape, std::move(out), {s},
                 [](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   return {sum_all(gout)};
                 });
}

}  // namespace

Tensor sum_all(const Tensor& a) {
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  Shape in_shape = a.shape();
  return make_op(Shape{}, {s}, {a},
                 [in_shape](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   return {broadcast_scalar(gout, in_shape)};
                 });
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean_all: empty tensor");
  return affine(sum_all(a), 1.0 / static_cast<double>(a.size()), 0.0);
}

Tensor sum_axis(const Tensor& a, int axis) {
  require_matrix(a, "sum_axis");
  if (axis != 0 && axis != 1) throw ShapeError("sum_axis: axis must be 0 or 1");
  const Index n = a.rows(), m = a.cols();
  auto av = a.values();
  if (axis == 0) {
    std::vector<double> out(static_cast<size_t>(m), 0.0);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) out[static_cast<size_t>(j)] += av[static_cast<size_t>(i * m + j)];
    return make_op({1, m}, std::move(out), {a},
                   [n](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                     return {broadcast_axis(gout, 0, n)};
                   });
  }
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) out[static_cast<size_t>(i)] += av[static_cast<size_t>(i * m + j)];
  return make_op({n, 1}, std::move(out), {a},
                 [m](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   return {broadcast_axis(gout, 1, m)};
                 });
}

Tensor broadcast_axis(const Tensor& a, int axis, Index n) {
  require_matrix(a, "broadcast_axis");
  if (axis != 0 && axis != 1) throw ShapeError("broadcast_axis: axis must be 0 or 1");
  if (a.shape()[static_cast<size_t>(axis)] != 1) {
    throw ShapeError("broadcast_axis: axis " + std::to_string(axis) +
                     " of " + shape_str(a.shape()) + " is not 1");
  }
  auto av = a.values();
  if (axis == 0) {
    const Index m = a.cols();
    std::vector<double> out(static_cast<size_t>(n * m));
    for (Index i = 0; i < n; ++i)
      std::copy(av.begin(), av.end(), out.begin() + i * m);
    return make_op({n, m}, std::move(out), {a},
                   [](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                     return {sum_axis(gout, 0)};
                   });
  }
  const Index r = a.rows();
  std::vector<double> out(static_cast<size_t>(r * n));
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < n; ++j) out[static_cast<size_t>(i * n + j)] = av[static_cast<size_t>(i)];
  return make_op({r, n}, std::move(out), {a},
                 [](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   return {sum_axis(gout, 1)};
                 });
}

namespace {

// Zero-pad `g` into shape `full` along `axis` at `start`; vjp is slice.
Tensor embed_slice(const Tensor& g, const Shape& full, int axis, Index start) {
  const Index n = full[0], m = full[1];
  const Index gn = g.rows(), gm = g.cols();
  std::vector<double> out(static_cast<size_t>(n * m), 0.0);
  auto gv = g.values();
  if (axis == 0) {
    for (Index i = 0; i < gn; ++i)
      std::copy(gv.begin() + i * gm, gv.begin() + (i + 1) * gm,
                out.begin() + (start + i) * m);
  } else {
    for (Index i = 0; i < gn; ++i)
      for (Index j = 0; j < gm; ++j)
        out[static_cast<size_t>(i * m + start + j)] = gv[static_cast<size_t>(i * gm + j)];
  }
  Index len = axis == 0 ? gn : gm;
  return make_op(full, std::move(out), {g},
                 [axis, start, len](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   return {slice(gout, axis, start, len)};
                 });
}

}  // namespace

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  for (const auto& p : parts) require_matrix(p, "concat");
  const int other = 1 - axis;
  const Index common = parts[0].shape()[static_cast<size_t>(other)];
  Index total = 0;
  for (const auto& p : parts) {
    if (p.shape()[static_cast<size_t>(other)] != common) {
      throw ShapeError("concat: non-axis dims differ: " +
                       shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    total += p.shape()[static_cast<size_t>(axis)];
  }
  Shape out_shape = axis == 0 ? Shape{total, common} : Shape{common, total};
  const Index n = out_shape[0], m = out_shape[1];
  std::vector<double> out(static_cast<size_t>(n * m));
  Index off = 0;
  for (const auto& p : parts) {
    auto pv = p.values();
    const Index pn = p.rows(), pm = p.cols();
    if (axis == 0) {
      std::copy(pv.begin(), pv.end(), out.begin() + off * m);
      off += pn;
    } else {
      for (Index i = 0; i < pn; ++i)
        for (Index j = 0; j < pm; ++j)
          out[static_cast<size_t>(i * m + off + j)] = pv[static_cast<size_t>(i * pm + j)];
      off += pm;
    }
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  std::vector<Index> sizes;
  for (const auto& p : parts) sizes.push_back(p.shape()[static_cast<size_t>(axis)]);
  return make_op(out_shape, std::move(out), std::move(inputs),
                 [axis, sizes](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   std::vector<Tensor> gs;
                   Index off2 = 0;
                   for (Index len : sizes) {
                     gs.push_back(slice(gout, axis, off2, len));
                     off2 += len;
                   }
                   return gs;
                 });
}

Tensor slice(const Tensor& a, int axis, Index start, Index len) {
  require_matrix(a, "slice");
  if (axis != 0 && axis != 1) throw ShapeError("slice: axis must be 0 or 1");
  const Index n = a.rows(), m = a.cols();
  const Index bound = axis == 0 ? n : m;
  if (start < 0 || len < 0 || start + len > bound) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of " +
                     shape_str(a.shape()));
  }
  auto av = a.values();
  Shape out_shape = axis == 0 ? Shape{len, m} : Shape{n, len};
  std::vector<double> out(static_cast<size_t>(shape_size(out_shape)));
  if (axis == 0) {
    std::copy(av.begin() + start * m, av.begin() + (start + len) * m, out.begin());
  } else {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < len; ++j)
        out[static_cast<size_t>(i * len + j)] = av[static_cast<size_t>(i * m + start + j)];
  }
  Shape full = a.shape();
  return make_op(out_shape, std::move(out), {a},
                 [axis, start, full](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   return {embed_slice(gout, full, axis, start)};
                 });
}

Tensor clamp_min(const Tensor& a, double lo) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = std::max(v, lo);
  return make_op(a.shape(), std::move(out), {a},
                 [a, lo](const Tensor&, const Tensor& gout) -> std::vector<Tensor> {
                   auto av = a.values();
                   std::vector<double> mask(av.size());
                   for (size_t i = 0; i < mask.size(); ++i)
                     mask[i] = av[i] > lo ? 1.0 : 0.0;
                   return {mul(gout, Tensor::from(a.shape(), std::move(mask)))};
                 });
}

Tensor dropout(const Tensor& a, double rate, bool train_mode, RngStream& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate " + std::to_string(rate) +
                                " outside [0, 1)");
  }
  if (!train_mode || rate == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(static_cast<size_t>(a.size()));
  for (double& v : mask) v = rng.uniform() < rate ? 0.0 : keep_scale;
  return mul(a, Tensor::from(a.shape(), std::move(mask)));
}

// ---- reverse pass ----

namespace {

std::vector<Tensor> topo_order(const Tensor& loss) {
  // Iterative post-order DFS over tracked nodes.
  std::vector<Tensor> order;
  std::unordered_set<const Node*> seen;
  std::vector<std::pair<Tensor, size_t>> stack;
  if (!loss.requires_grad()) return order;
  stack.emplace_back(loss, 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    const auto& inputs = t.node()->inputs;
    bool descended = false;
    while (next < inputs.size()) {
      const Tensor& in = inputs[next++];
      if (in.requires_grad() && !seen.count(in.node().get())) {
        seen.insert(in.node().get());
        stack.emplace_back(in, 0);
        descended = true;
        break;
      }
    }
    if (!descended && next >= stack.back().first.node()->inputs.size()) {
      order.push_back(stack.back().first);
      stack.pop_back();
    }
  }
  return order;
}

std::unordered_map<const Node*, Tensor> grad_map(const Tensor& loss,
                                                 const std::vector<Tensor>& order) {
  std::unordered_map<const Node*, Tensor> gmap;
  gmap.emplace(loss.node().get(), Tensor::full(loss.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Tensor& t = *it;
    auto found = gmap.find(t.node().get());
    if (found == gmap.end()) continue;
    const Tensor& gout = found->second;
    if (!t.node()->vjp) continue;
    std::vector<Tensor> gs = t.node()->vjp(t, gout);
    const auto& inputs = t.node()->inputs;
    for (size_t i = 0; i < inputs.size(); ++i) {
      if (!inputs[i].requires_grad() || !gs[i].defined()) continue;
      auto [slot, inserted] = gmap.try_emplace(inputs[i].node().get(), gs[i]);
      if (!inserted) slot->second = add(slot->second, gs[i]);
    }
  }
  return gmap;
}

void check_scalar_loss(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<empty>")));
  }
}

}  // namespace

void backward(const Tensor& loss) {
  check_scalar_loss(loss);
  if (!loss.requires_grad()) return;  // constant: nothing tracked
  NoGradGuard guard;
  auto order = topo_order(loss);
  auto gmap = grad_map(loss, order);
  for (const Tensor& t : order) {
    auto found = gmap.find(t.node().get());
    if (found == gmap.end()) continue;
    auto& acc = t.node()->grad_accum;
    auto gv = found->second.values();
    if (acc.empty()) acc.assign(gv.begin(), gv.end());
    else
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += gv[i];
  }
}

std::vector<Tensor> gradients(const Tensor& loss, std::span<const Tensor> wrt,
                              bool create_graph) {
  check_scalar_loss(loss);
  std::unordered_map<const Node*, Tensor> gmap;
  if (loss.requires_grad()) {
    if (create_graph) {
      auto order = topo_order(loss);
      gmap = grad_map(loss, order);
    } else {
      NoGradGuard guard;
      auto order = topo_order(loss);
      gmap = grad_map(loss, order);
    }
  }
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Tensor& t : wrt) {
    auto found = gmap.find(t.node().get());
    out.push_back(found != gmap.end() ? found->second : Tensor::zeros(t.shape()));
  }
  return out;
}

bool all_finite(const Tensor& t) {
  for (double v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ogan
