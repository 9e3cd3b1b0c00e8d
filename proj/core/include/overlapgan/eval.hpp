#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "overlapgan/dataset.hpp"
#include "overlapgan/nets.hpp"
#include "overlapgan/rng.hpp"
#include "overlapgan/tensor.hpp"

namespace ogan {

// A class-distinct or class-mutual condition: the mean of the member classes'
// one-hot vectors, paired with the fine component it should produce.
struct ConditionState {
  std::string name;             // "A", "A&B", "A&B&C", ...
  std::vector<int> classes;     // sorted member class ids
  std::vector<double> vector;   // c-dim simplex condition
  int expected_component = -1;
};

// One state per fine component's membership set, distinct and mutual alike.
std::vector<ConditionState> enumerate_states(const OverlapScheme& scheme);

Tensor condition_batch(const ConditionState& state, Index n);

struct DmaResult {
  std::vector<double> per_state;
  double mean = 0.0;
};

using StateSampler = std::function<Tensor(const ConditionState&, Index n)>;

// Fraction of sampled points whose fine-component Bayes argmax equals the
// state's expected component; unweighted mean over states.
DmaResult dma_with_sampler(const OverlapDataset& dataset,
                           const std::vector<ConditionState>& states,
                           const StateSampler& sampler, Index n_per_state);
DmaResult dma(const GeneratorNet& net, const OverlapDataset& dataset,
              Index n_per_state, RngStream& z_rng);

// Squared Frechet distance between Gaussian fits of two sample sets (the FID
// convention). Singular covariances are regularized by +1e-6 I and flagged.
double frechet_distance(const Tensor& samples_a, const Tensor& samples_b,
                        bool* regularized = nullptr);

// c x c matrix; row j is the mean posterior over samples conditioned on j.
struct PosteriorMatrix {
  int num_classes = 0;
  std::vector<double> values;  // row-major
  double at(int i, int j) const {
    return values[static_cast<size_t>(i * num_classes + j)];
  }
};

using BatchClassifier = std::function<Tensor(const Tensor& x)>;  // n x d -> n x c

PosteriorMatrix posterior_matrix_real(const BatchClassifier& classifier,
                                      const OverlapDataset& dataset,
                                      Index n_per_class, RngStream& data_rng);
PosteriorMatrix posterior_matrix_pgan(const PGanNets& nets, Index n_per_class,
                                      RngStream& z_rng);
double max_abs_diff(const PosteriorMatrix& a, const PosteriorMatrix& b);

// Points generated along the linear interpolation of two condition vectors
// with one fixed noise row. steps >= 2; endpoints equal plain generate calls.
std::vector<std::array<double, 2>> interpolate(const GeneratorNet& net,
                                               const ConditionState& from,
                                               const ConditionState& to,
                                               int steps, const Tensor& z_row);

struct EntropyProfile {
  double mean = 0.0;
  double q10 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q90 = 0.0;
  Index n = 0;
};

// Oracle-posterior entropy statistics over a sample set (nats).
EntropyProfile posterior_entropy_profile(const Tensor& samples,
                                         const OverlapDataset& oracle);

}  // namespace ogan
