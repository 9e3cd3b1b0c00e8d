#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "overlapgan/rng.hpp"
#include "overlapgan/tensor.hpp"

namespace ogan {

enum class Variant { kAcGan, kCGanConcat, kCpGan };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // 1 x out
};

Linear make_linear(Index in, Index out, RngStream& rng);
Tensor linear(const Linear& l, const Tensor& x);

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// MLP generator: [z ; cond] -> 3 x (FC width, ReLU) -> FC out_dim.
struct GeneratorNet {
  Index z_dim = 2;
  Index cond_dim = 2;
  Index width = 512;
  Index out_dim = 2;
  std::vector<Linear> hidden;
  Linear out;
};

GeneratorNet make_generator(Index z_dim, Index cond_dim, Index width,
                            Index out_dim, RngStream& rng);

// cond rows must lie on the simplex within 1e-6 (one-hot rows qualify).
Tensor generate(const GeneratorNet& net, const Tensor& z, const Tensor& cond);

struct DropoutSpec {
  bool enabled = true;
  std::array<double, 3> rates{0.2, 0.5, 0.5};
};

// Shared-trunk discriminator/classifier: k_shared of the 3 hidden FC+ReLU
// layers are shared; the rest are duplicated per head, then FC -> 1 for D
// and FC -> c for C. Dropout rates apply by hidden-layer position.
struct DiscClassifierNet {
  Index in_dim = 2;
  int num_classes = 2;
  Index width = 512;
  int k_shared = 3;
  DropoutSpec dropout;
  std::vector<Linear> shared;
  std::vector<Linear> d_tail;
  std::vector<Linear> c_tail;
  Linear d_head;
  Linear c_head;
};

DiscClassifierNet make_disc_classifier(Index in_dim, int num_classes,
                                       Index width, int k_shared,
                                       const DropoutSpec& dropout,
                                       RngStream& rng);

struct DiscClassifierOut {
  Tensor d_score;   // n x 1, raw critic output (no sigmoid)
  Tensor c_logits;  // n x c
};

// Both heads over one shared-trunk evaluation. In train mode dropout masks
// come from `rng`; the shared portion uses one mask set for both heads.
DiscClassifierOut disc_classifier_forward(const DiscClassifierNet& net,
                                          const Tensor& x, bool train_mode,
                                          RngStream& rng);
Tensor discriminate(const DiscClassifierNet& net, const Tensor& x,
                    bool train_mode, RngStream& rng);
Tensor classify_logits(const DiscClassifierNet& net, const Tensor& x,
                       bool train_mode, RngStream& rng);
// softmax(classify_logits); rows on the simplex.
Tensor classify(const DiscClassifierNet& net, const Tensor& x, bool train_mode,
                RngStream& rng);

// Posterior generator G_p and its conditional critic D_p. G_p ends in a
// softmax so outputs are valid posteriors for any weights; D_p injects the
// condition after each hidden layer through a learned projection.
struct PGanNets {
  int num_classes = 2;
  Index width = 512;
  std::vector<Linear> g_hidden;
  Linear g_out;
  std::vector<Linear> d_hidden;
  std::vector<Linear> d_proj;
  Linear d_head;
};

PGanNets make_pgan(int num_classes, Index width, RngStream& rng);

// z: n x c, y: n x c one-hot. Output rows on the simplex.
Tensor pgan_generate(const PGanNets& nets, const Tensor& z, const Tensor& y);
Tensor pgan_critic(const PGanNets& nets, const Tensor& s, const Tensor& y);

struct PganSample {
  Tensor s;  // n x c simplex rows
  Tensor y;  // n x c one-hot conditions used
};
PganSample pgan_sample(const PGanNets& nets, Index n, RngStream& z_rng,
                       RngStream& y_rng);

std::vector<NamedParam> named_params(const GeneratorNet& net);
std::vector<NamedParam> named_params(const DiscClassifierNet& net);
std::vector<NamedParam> pgan_generator_params(const PGanNets& nets);
std::vector<NamedParam> pgan_critic_params(const PGanNets& nets);

// Generator + shared D/C trunk + heads under one variant tag, with the
// optional posterior GAN attached.
struct ModelBundle {
  Variant variant = Variant::kCpGan;
  GeneratorNet g;
  DiscClassifierNet dc;
  std::optional<PGanNets> pgan;
};

std::vector<NamedParam> named_params(const ModelBundle& bundle);
ModelBundle clone(const ModelBundle& bundle);

}  // namespace ogan
