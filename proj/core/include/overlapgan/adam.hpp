#pragma once

#include <cstdint>
#include <vector>

#include "overlapgan/tensor.hpp"

namespace ogan {

// Per-parameter Adam moments with bias correction.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
};

struct AdamParams {
  double alpha = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

// One Adam update of `param` in place from its accumulated gradient buffer.
// States are keyed positionally: states[i] belongs to params[i] for the life
// of the optimizer. Aborts with NumericError on non-finite gradients.
void adam_step(std::vector<Tensor>& params, std::vector<AdamState>& states,
               const AdamParams& hp);

// Single-tensor flavor used by tests.
void adam_step(Tensor& param, AdamState& state, const AdamParams& hp);

// Linear decay to zero: alpha_t = alpha0 * (1 - t / T), clamped at 0.
// T must be positive.
double lr_schedule(std::int64_t t, std::int64_t total_iters, double alpha0);

}  // namespace ogan
