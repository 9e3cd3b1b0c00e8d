#pragma once

#include <array>
#include <string>
#include <vector>

#include "overlapgan/rng.hpp"
#include "overlapgan/tensor.hpp"

namespace ogan {

// One 2-D Gaussian component of the mixture.
struct FineComponent {
  int id = 0;
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 4> cov{1.0, 0.0, 0.0, 1.0};  // row-major 2x2, SPD
  double weight = 1.0;
};

// Assignment of fine components to coarse classes. A component listed under
// one class is class-distinct; under several, class-mutual.
struct OverlapScheme {
  int num_classes = 0;
  // membership[i]: sorted coarse-class ids containing fine component i.
  std::vector<std::vector<int>> membership;

  void validate(int num_components) const;
};

struct LabeledBatch {
  Tensor x;                      // n x 2 points
  Tensor y;                      // n x c one-hot rows
  std::vector<int> fine;         // generating component per row
  std::vector<int> labels;       // coarse label index per row
};

class OverlapDataset {
 public:
  OverlapDataset(std::vector<FineComponent> components, OverlapScheme scheme);

  const std::vector<FineComponent>& components() const { return components_; }
  const OverlapScheme& scheme() const { return scheme_; }
  int num_classes() const { return scheme_.num_classes; }
  int num_components() const { return static_cast<int>(components_.size()); }

  // Component by weight, point by its Gaussian, hard label uniformly over the
  // component's membership set.
  LabeledBatch sample_batch(Index n, RngStream& rng) const;

  // Points whose observed coarse label is `cls`: component i in cls with
  // probability proportional to weight_i / |membership_i|.
  Tensor sample_class_conditional(int cls, Index n, RngStream& rng) const;

  // Points from one fine component.
  Tensor sample_component(int component, Index n, RngStream& rng) const;

  // Coarse-class posterior p(y | x) under the uniform-label-split mixture.
  // If every component density underflows, returns the uniform vector and
  // sets *underflow.
  std::vector<double> bayes_posterior(const std::array<double, 2>& x,
                                      bool* underflow = nullptr) const;
  // Batch flavor over an n x 2 tensor; returns n x c.
  Tensor bayes_posterior_batch(const Tensor& x) const;

  // Fine-component responsibilities and their argmax (the evaluation oracle).
  std::vector<double> fine_responsibilities(const std::array<double, 2>& x) const;
  int oracle_component(const std::array<double, 2>& x) const;

  // Entropy of the coarse Bayes posterior at x, in nats.
  double posterior_entropy(const std::array<double, 2>& x) const;

 private:
  std::vector<FineComponent> components_;
  OverlapScheme scheme_;
  std::vector<double> cum_weights_;
  std::vector<std::array<double, 3>> chol_;  // (l11, l21, l22) per component
};

// Two overlapping isotropic Gaussians, means (-1,0) and (+1,0), sigma = 1,
// one per class.
OverlapDataset build_two_gaussian_toy();

// k_fine Gaussians on a radius-4 ring with unit covariance and the paper's
// 10-to-5 / 7-to-3 coarse relabelings. scheme is "10to5" (k_fine = 10) or
// "7to3" (k_fine = 7).
OverlapDataset build_ring_overlap(int k_fine, const std::string& scheme);

// z ~ N(0, I), n x dim.
Tensor sample_noise(Index n, Index dim, RngStream& rng);
// Uniform categorical one-hot rows, n x c; label ints via out_labels.
Tensor sample_categorical(Index n, int c, RngStream& rng,
                          std::vector<int>* out_labels = nullptr);

std::string class_letter(int idx);
int class_index_from_letter(const std::string& letter, int num_classes);

}  // namespace ogan
