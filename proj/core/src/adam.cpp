#include "overlapgan/adam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ogan {

void adam_step(Tensor& param, AdamState& state, const AdamParams& hp) {
  const size_t n = static_cast<size_t>(param.size());
  if (state.m.empty()) state.m.assign(n, 0.0);
  if (state.v.empty()) state.v.assign(n, 0.0);
  if (state.m.size() != n || state.v.size() != n) {
    throw ShapeError("adam_step: moment size " + std::to_string(state.m.size()) +
                     " does not match parameter shape " + shape_str(param.shape()));
  }
  auto grad = param.grad();
  if (grad.empty()) return;  // no gradient reached this parameter

  state.t += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  auto value = param.mutable_values();
  for (size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    if (!std::isfinite(g)) {
      throw NumericError("adam_step: non-finite gradient at index " +
                         std::to_string(i) + " (t=" + std::to_string(state.t) + ")");
    }
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    value[i] -= hp.alpha * mhat / (std::sqrt(vhat) + hp.eps);
  }
}

void adam_step(std::vector<Tensor>& params, std::vector<AdamState>& states,
               const AdamParams& hp) {
  if (params.size() != states.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(params.size()) +
                                " params vs " + std::to_string(states.size()) +
                                " states");
  }
  for (size_t i = 0; i < params.size(); ++i) adam_step(params[i], states[i], hp);
}

double lr_schedule(std::int64_t t, std::int64_t total_iters, double alpha0) {
  if (total_iters <= 0) {
    throw std::invalid_argument("lr_schedule: total_iters must be positive");
  }
  const double frac = 1.0 - static_cast<double>(t) / static_cast<double>(total_iters);
  return alpha0 * std::max(0.0, frac);
}

}  // namespace ogan
