#include "overlapgan/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace ogan {

namespace {

// Floor for log arguments in KL/cross-entropy terms.
const double kLogFloor = std::exp(-30.0);

void require_nonempty_scores(const Tensor& t, const char* what) {
  if (!t.defined() || t.size() == 0) {
    throw std::invalid_argument(std::string(what) + ": empty score batch");
  }
}

void require_simplex_rows(const Tensor& s, const char* what) {
  const Index n = s.rows(), c = s.cols();
  auto v = s.values();
  for (Index i = 0; i < n; ++i) {
    double sum = 0.0;
    for (Index j = 0; j < c; ++j) {
      const double e = v[static_cast<size_t>(i * c + j)];
      if (e < -1e-9) {
        throw std::invalid_argument(std::string(what) + ": negative entry in row " +
                                    std::to_string(i));
      }
      sum += e;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) +
                                  " sums to " + std::to_string(sum));
    }
  }
}

void require_one_hot_rows(const Tensor& y, const char* what) {
  const Index n = y.rows(), c = y.cols();
  auto v = y.values();
  for (Index i = 0; i < n; ++i) {
    int ones = 0;
    for (Index j = 0; j < c; ++j) {
      const double e = v[static_cast<size_t>(i * c + j)];
      if (e == 1.0) ++ones;
      else if (e != 0.0) {
        throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) +
                                    " is not one-hot");
      }
    }
    if (ones != 1) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) +
                                  " is not one-hot");
    }
  }
}

Tensor cross_entropy_mean(const Tensor& s, const Tensor& y, const char* what) {
  require_simplex_rows(s, what);
  require_one_hot_rows(y, what);
  if (s.shape() != y.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(s.shape()) +
                     " vs " + shape_str(y.shape()));
  }
  Tensor nll = sum_all(mul(y, log(clamp_min(s, kLogFloor))));
  return affine(nll, -1.0 / static_cast<double>(s.rows()), 0.0);
}

}  // namespace

std::string adv_mode_name(AdvMode m) {
  return m == AdvMode::kWgan ? "wgan" : "nonsaturating";
}

AdvMode adv_mode_from_name(const std::string& name) {
  if (name == "wgan") return AdvMode::kWgan;
  if (name == "nonsaturating") return AdvMode::kNonsaturating;
  throw std::invalid_argument("unknown gan mode: " + name);
}

AdvPair adversarial_loss(const Tensor& d_real, const Tensor& d_fake, AdvMode mode) {
  require_nonempty_scores(d_real, "adversarial_loss");
  require_nonempty_scores(d_fake, "adversarial_loss");
  if (mode == AdvMode::kWgan) {
    return {sub(mean_all(d_fake), mean_all(d_real)), neg(mean_all(d_fake))};
  }
  // -E[log D(real)] - E[log(1 - D(fake))] over sigmoid critic outputs.
  Tensor d_part = add(mean_all(softplus(neg(d_real))), mean_all(softplus(d_fake)));
  return {d_part, adversarial_generator_part(d_fake, mode)};
}

Tensor adversarial_generator_part(const Tensor& d_fake, AdvMode mode) {
  require_nonempty_scores(d_fake, "adversarial_generator_part");
  if (mode == AdvMode::kWgan) return neg(mean_all(d_fake));
  return mean_all(softplus(neg(d_fake)));
}

namespace {

Tensor penalty_from_interpolates(const Tensor& xhat, const Tensor& score) {
  if (score.size() != xhat.rows()) {
    throw ShapeError("gradient_penalty: critic returned " + shape_str(score.shape()) +
                     " for input " + shape_str(xhat.shape()));
  }
  const Tensor wrt[] = {xhat};
  Tensor g = gradients(sum_all(score), wrt, /*create_graph=*/true)[0];
  if (!all_finite(g)) {
    throw NumericError("gradient_penalty: non-finite critic gradient");
  }
  Tensor sq = sum_axis(mul(g, g), 1);
  // Rows whose critic gradient vanishes identically (dropout or dead ReLUs
  // can kill a whole path) contribute the constant (0 - 1)^2 = 1. Routing
  // them around the sqrt keeps the second backward pass finite; zero is a
  // valid subgradient of the norm there.
  const Index n = sq.rows();
  std::vector<double> alive(static_cast<size_t>(n)), shift(static_cast<size_t>(n));
  auto sqv = sq.values();
  for (Index i = 0; i < n; ++i) {
    const bool dead = sqv[static_cast<size_t>(i)] < 1e-24;
    alive[static_cast<size_t>(i)] = dead ? 0.0 : 1.0;
    shift[static_cast<size_t>(i)] = dead ? 1.0 : 0.0;
  }
  Tensor alive_t = Tensor::from({n, 1}, std::move(alive));
  Tensor shift_t = Tensor::from({n, 1}, std::move(shift));
  Tensor norm = sqrt(add(sq, shift_t));
  Tensor excess = affine(norm, 1.0, -1.0);
  Tensor per_row = add(mul(alive_t, mul(excess, excess)), shift_t);
  return mean_all(per_row);
}

Tensor interpolate_rows(const Tensor& a, const Tensor& b,
                        const std::vector<double>& eps, bool requires_grad) {
  const Index n = a.rows(), d = a.cols();
  std::vector<double> out(static_cast<size_t>(n * d));
  auto av = a.values(), bv = b.values();
  for (Index i = 0; i < n; ++i) {
    const double e = eps[static_cast<size_t>(i)];
    for (Index j = 0; j < d; ++j) {
      const size_t k = static_cast<size_t>(i * d + j);
      out[k] = e * av[k] + (1.0 - e) * bv[k];
    }
  }
  return Tensor::from({n, d}, std::move(out), requires_grad);
}

}  // namespace

Tensor gradient_penalty(const CriticFn& critic, const Tensor& x_real,
                        const Tensor& x_fake, RngStream& eps_rng) {
  if (x_real.shape() != x_fake.shape()) {
    throw ShapeError("gradient_penalty: batch shapes differ: " +
                     shape_str(x_real.shape()) + " vs " + shape_str(x_fake.shape()));
  }
  const Index n = x_real.rows();
  std::vector<double> eps(static_cast<size_t>(n));
  for (double& e : eps) e = eps_rng.uniform();
  Tensor xhat = interpolate_rows(x_real, x_fake, eps, /*requires_grad=*/true);
  return penalty_from_interpolates(xhat, critic(xhat));
}

Tensor gradient_penalty(const CondCriticFn& critic, const Tensor& x_real,
                        const Tensor& x_fake, const Tensor& cond_real,
                        const Tensor& cond_fake, RngStream& eps_rng) {
  if (x_real.shape() != x_fake.shape() || cond_real.shape() != cond_fake.shape() ||
      x_real.rows() != cond_real.rows()) {
    throw ShapeError("gradient_penalty: batch shapes differ: " +
                     shape_str(x_real.shape()) + "/" + shape_str(x_fake.shape()) +
                     " with conds " + shape_str(cond_real.shape()) + "/" +
                     shape_str(cond_fake.shape()));
  }
  const Index n = x_real.rows();
  std::vector<double> eps(static_cast<size_t>(n));
  for (double& e : eps) e = eps_rng.uniform();
  Tensor xhat = interpolate_rows(x_real, x_fake, eps, /*requires_grad=*/true);
  Tensor chat = interpolate_rows(cond_real, cond_fake, eps, /*requires_grad=*/false);
  return penalty_from_interpolates(xhat, critic(xhat, chat));
}

Tensor kl_ac_loss_real(const Tensor& s_real, const Tensor& y_real) {
  return cross_entropy_mean(s_real, y_real, "kl_ac_loss_real");
}

Tensor kl_ac_loss_gen(const Tensor& s_gen, const Tensor& y_gen) {
  return cross_entropy_mean(s_gen, y_gen, "kl_ac_loss_gen");
}

Tensor kl_cp_loss(const Tensor& s_real, const Tensor& s_gen) {
  require_simplex_rows(s_real, "kl_cp_loss: s_real");
  require_simplex_rows(s_gen, "kl_cp_loss: s_gen");
  if (s_real.shape() != s_gen.shape()) {
    throw ShapeError("kl_cp_loss: shape mismatch " + shape_str(s_real.shape()) +
                     " vs " + shape_str(s_gen.shape()));
  }
  // sum_k s_r (log s_r - log s_g); entries with s_r = 0 contribute 0 exactly.
  Tensor log_ratio = sub(log(clamp_min(s_real, kLogFloor)),
                         log(clamp_min(s_gen, kLogFloor)));
  Tensor kl = sum_all(mul(s_real, log_ratio));
  return affine(kl, 1.0 / static_cast<double>(s_real.rows()), 0.0);
}

AdvPair pgan_losses(const Tensor& dp_real, const Tensor& dp_fake) {
  return adversarial_loss(dp_real, dp_fake, AdvMode::kWgan);
}

std::pair<Tensor, Tensor> compose(Variant variant, const ComposeInputs& in,
                                  double lambda_r, double lambda_g,
                                  double lambda_gp) {
  if (lambda_r < 0.0 || lambda_g < 0.0 || lambda_gp < 0.0) {
    throw std::invalid_argument("compose: negative loss weight");
  }
  Tensor d_side = in.gan_d;
  if (variant != Variant::kCGanConcat && in.ac_r.defined()) {
    d_side = add(d_side, affine(in.ac_r, lambda_r, 0.0));
  }
  if (in.gp.defined()) {
    d_side = add(d_side, affine(in.gp, lambda_gp, 0.0));
  }
  Tensor g_side = in.gan_g;
  if (variant != Variant::kCGanConcat && in.cls_g.defined()) {
    g_side = add(g_side, affine(in.cls_g, lambda_g, 0.0));
  }
  return {d_side, g_side};
}

}  // namespace ogan
