#pragma once

#include <functional>
#include <string>
#include <utility>

#include "overlapgan/nets.hpp"
#include "overlapgan/rng.hpp"
#include "overlapgan/tensor.hpp"

namespace ogan {

enum class AdvMode { kNonsaturating, kWgan };

std::string adv_mode_name(AdvMode m);
AdvMode adv_mode_from_name(const std::string& name);

struct AdvPair {
  Tensor d_part;  // what D minimizes
  Tensor g_part;  // what G minimizes
};

// WGAN: d = mean(fake) - mean(real), g = -mean(fake). Nonsaturating: the
// log-sigmoid form over raw critic outputs with the standard G loss.
AdvPair adversarial_loss(const Tensor& d_real, const Tensor& d_fake, AdvMode mode);
// G-side part alone, for generator steps where no real scores exist.
Tensor adversarial_generator_part(const Tensor& d_fake, AdvMode mode);

using CriticFn = std::function<Tensor(const Tensor& x)>;
using CondCriticFn = std::function<Tensor(const Tensor& x, const Tensor& cond)>;

// mean over rows of (||grad_xhat critic(xhat)||_2 - 1)^2 at per-row uniform
// interpolates of real and fake. Differentiable w.r.t. the critic weights
// through a second tape pass.
Tensor gradient_penalty(const CriticFn& critic, const Tensor& x_real,
                        const Tensor& x_fake, RngStream& eps_rng);
// Conditioned critics: conditions are interpolated with the same per-row
// epsilon and held constant; the gradient norm is over x only.
Tensor gradient_penalty(const CondCriticFn& critic, const Tensor& x_real,
                        const Tensor& x_fake, const Tensor& cond_real,
                        const Tensor& cond_fake, RngStream& eps_rng);

// mean of -y . log s over the batch; equals D_KL(y || s) for one-hot y.
Tensor kl_ac_loss_real(const Tensor& s_real, const Tensor& y_real);
Tensor kl_ac_loss_gen(const Tensor& s_gen, const Tensor& y_gen);

// mean of D_KL(s_real || s_gen) over paired rows, with 0 log 0 := 0.
// s_real is the conditioning target; pass it detached so no gradient flows
// into the classifier through that branch.
Tensor kl_cp_loss(const Tensor& s_real, const Tensor& s_gen);

// Posterior-space adversarial pair (WGAN forms, shared implementation).
AdvPair pgan_losses(const Tensor& dp_real, const Tensor& dp_fake);

// Scalar snapshot of one iteration's terms for the metrics log.
struct LossTerms {
  double gan_d = 0.0;
  double gan_g = 0.0;
  double ac_r = 0.0;
  double cls_g = 0.0;
  double gp = 0.0;
  double composite_d = 0.0;
  double composite_g = 0.0;
};

struct ComposeInputs {
  Tensor gan_d;
  Tensor gan_g;
  Tensor ac_r;   // omitted for cgan-concat
  Tensor cls_g;  // variant classifier term; may be absent (pre-onset)
  Tensor gp;     // absent when lambda_gp = 0
};

// Composite objectives: D/C side = gan_d + lambda_r * ac_r + lambda_gp * gp,
// G side = gan_g + lambda_g * cls_g, with classifier terms dropped for
// cgan-concat. Negative lambdas are rejected.
std::pair<Tensor, Tensor> compose(Variant variant, const ComposeInputs& in,
                                  double lambda_r, double lambda_g,
                                  double lambda_gp);

}  // namespace ogan
