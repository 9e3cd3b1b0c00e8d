#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "overlapgan/tensor.hpp"

namespace ogan::testing {

// Central finite differences of a scalar forward pass w.r.t. one parameter
// tensor. `forward` must rebuild the graph from the parameter's current
// values on every call.
inline std::vector<double> finite_diff_grad(Tensor param,
                                            const std::function<double()>& forward,
                                            double h = 1e-5) {
  std::vector<double> grad(static_cast<size_t>(param.size()));
  auto values = param.mutable_values();
  for (size_t i = 0; i < grad.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + h;
    const double f_plus = forward();
    values[i] = keep - h;
    const double f_minus = forward();
    values[i] = keep;
    grad[i] = (f_plus - f_minus) / (2.0 * h);
  }
  return grad;
}

// Relative agreement with an absolute floor for near-zero gradients.
inline bool grad_close(double analytic, double numeric, double rel_tol = 1e-4,
                       double abs_tol = 1e-7) {
  const double diff = std::abs(analytic - numeric);
  if (diff < abs_tol) return true;
  return diff < rel_tol * std::max(std::abs(analytic), std::abs(numeric));
}

// Checks every coordinate of a parameter against the finite-difference
// oracle; returns the number of failing coordinates.
inline int gradcheck(Tensor param, const std::function<Tensor()>& loss_fn,
                     double h = 1e-5, double rel_tol = 1e-4) {
  Tensor loss = loss_fn();
  const Tensor wrt[] = {param};
  Tensor analytic = gradients(loss, wrt)[0];
  auto numeric = finite_diff_grad(
      param, [&]() { return loss_fn().item(); }, h);
  int failures = 0;
  for (size_t i = 0; i < numeric.size(); ++i) {
    if (!grad_close(analytic.values()[i], numeric[i], rel_tol)) ++failures;
  }
  return failures;
}

}  // namespace ogan::testing
