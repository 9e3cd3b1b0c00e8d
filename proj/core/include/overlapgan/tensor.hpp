#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "overlapgan/rng.hpp"

namespace ogan {

using Index = std::int64_t;
using Shape = std::vector<Index>;

Index shape_size(const Shape& s);
std::string shape_str(const Shape& s);

// Thrown on non-conforming operand shapes; the message carries both shapes.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a non-finite value is detected where the run cannot continue.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
struct Node;
}

// Dense real tensor participating in a reverse-mode gradient tape. Handles
// are cheap shared references to graph nodes; the tape is the implicit DAG
// of nodes reachable from a loss.
class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  Index size() const;
  Index rows() const;  // rank-2 only
  Index cols() const;  // rank-2 only

  std::span<const double> values() const;
  double item() const;  // scalar only
  double at(Index i) const;

  bool requires_grad() const;
  // Value copy detached from the tape.
  Tensor detach() const;

  // Gradient buffer accumulated by backward(). Empty until populated.
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // In-place mutation of leaf values (optimizer updates). Graphs built from
  // the old values must not be reused afterwards.
  std::span<double> mutable_values();

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// While alive, newly created ops are not recorded on the tape.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_recording_enabled();

// ---- forward ops ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// add supports same-shape operands, a row bias (n x m) + (1 x m), and a
// scalar addend.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, same shape
Tensor div(const Tensor& a, const Tensor& b);  // elementwise, same shape
Tensor affine(const Tensor& a, double scale, double shift);
inline Tensor neg(const Tensor& a) { return affine(a, -1.0, 0.0); }

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);

Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// Row/column reduction with kept axis: sum_axis(a, 0): (n x m) -> (1 x m),
// sum_axis(a, 1): (n x m) -> (n x 1).
Tensor sum_axis(const Tensor& a, int axis);
// Expand a kept size-1 axis back to n.
Tensor broadcast_axis(const Tensor& a, int axis, Index n);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice(const Tensor& a, int axis, Index start, Index len);
Tensor clamp_min(const Tensor& a, double lo);

// Inverted dropout: kept entries scaled by 1/(1-rate); eval mode is the
// identity (returns `a` itself). rate must lie in [0, 1).
Tensor dropout(const Tensor& a, double rate, bool train_mode, RngStream& rng);

// ---- reverse pass ----
// Accumulates gradients of `loss` (scalar) into the grad buffers of every
// tracked node reachable from it. Repeated calls accumulate.
void backward(const Tensor& loss);

// Functional gradients of `loss` w.r.t. `wrt`, without touching buffers.
// With create_graph the returned tensors are tracked, enabling a second
// backward pass through them (gradient-of-gradient).
std::vector<Tensor> gradients(const Tensor& loss, std::span<const Tensor> wrt,
                              bool create_graph = false);

bool all_finite(const Tensor& t);

}  // namespace ogan
