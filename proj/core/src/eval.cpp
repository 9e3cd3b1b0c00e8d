#include "overlapgan/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ogan {

std::vector<ConditionState> enumerate_states(const OverlapScheme& scheme) {
  scheme.validate(static_cast<int>(scheme.membership.size()));
  std::vector<ConditionState> states;
  const int c = scheme.num_classes;
  for (size_t i = 0; i < scheme.membership.size(); ++i) {
    ConditionState st;
    st.classes = scheme.membership[i];
    std::sort(st.classes.begin(), st.classes.end());
    st.expected_component = static_cast<int>(i);
    st.vector.assign(static_cast<size_t>(c), 0.0);
    for (int cls : st.classes) {
      st.vector[static_cast<size_t>(cls)] = 1.0 / static_cast<double>(st.classes.size());
    }
    for (size_t k = 0; k < st.classes.size(); ++k) {
      if (k) st.name += "&";
      st.name += class_letter(st.classes[k]);
    }
    states.push_back(std::move(st));
  }
  return states;
}

Tensor condition_batch(const ConditionState& state, Index n) {
  const Index c = static_cast<Index>(state.vector.size());
  std::vector<double> out(static_cast<size_t>(n * c));
  for (Index i = 0; i < n; ++i) {
    std::copy(state.vector.begin(), state.vector.end(), out.begin() + i * c);
  }
  return Tensor::from({n, c}, std::move(out));
}

DmaResult dma_with_sampler(const OverlapDataset& dataset,
                           const std::vector<ConditionState>& states,
                           const StateSampler& sampler, Index n_per_state) {
  DmaResult result;
  for (const auto& st : states) {
    Tensor pts = sampler(st, n_per_state);
    auto v = pts.values();
    Index hits = 0;
    for (Index i = 0; i < pts.rows(); ++i) {
      const int comp = dataset.oracle_component(
          {v[static_cast<size_t>(2 * i)], v[static_cast<size_t>(2 * i + 1)]});
      if (comp == st.expected_component) ++hits;
    }
    result.per_state.push_back(static_cast<double>(hits) /
                               static_cast<double>(n_per_state));
  }
  double sum = 0.0;
  for (double a : result.per_state) sum += a;
  result.mean = result.per_state.empty() ? 0.0 : sum / result.per_state.size();
  return result;
}

DmaResult dma(const GeneratorNet& net, const OverlapDataset& dataset,
              Index n_per_state, RngStream& z_rng) {
  auto states = enumerate_states(dataset.scheme());
  NoGradGuard guard;
  return dma_with_sampler(
      dataset, states,
      [&](const ConditionState& st, Index n) {
        Tensor z = sample_noise(n, net.z_dim, z_rng);
        return generate(net, z, condition_batch(st, n));
      },
      n_per_state);
}

namespace {

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

GaussianFit fit_gaussian(const Tensor& samples) {
  const Index n = samples.rows(), d = samples.cols();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      X(samples.values().data(), n, d);
  GaussianFit fit;
  fit.mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - fit.mean.transpose();
  fit.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  return fit;
}

bool near_singular(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  return es.eigenvalues().minCoeff() < 1e-10;
}

// Tr((A B)^(1/2)) for SPD A, B via the symmetrized product.
double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 2) {
    // Closed form: for a 2x2 matrix with nonnegative eigenvalues,
    // Tr(sqrt(M)) = sqrt(tr(M) + 2 sqrt(det(M))).
    const Eigen::MatrixXd m = a * b;
    const double tr = m.trace();
    const double det = std::max(0.0, m.determinant());
    return std::sqrt(std::max(0.0, tr + 2.0 * std::sqrt(det)));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_b(b);
  Eigen::VectorXd root = es_b.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd b_half =
      es_b.eigenvectors() * root.asDiagonal() * es_b.eigenvectors().transpose();
  Eigen::MatrixXd middle = b_half * a * b_half;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_m(middle);
  return es_m.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

double frechet_distance(const Tensor& samples_a, const Tensor& samples_b,
                        bool* regularized) {
  if (samples_a.cols() != samples_b.cols()) {
    throw ShapeError("frechet_distance: dimension mismatch " +
                     shape_str(samples_a.shape()) + " vs " +
                     shape_str(samples_b.shape()));
  }
  const Index d = samples_a.cols();
  if (samples_a.rows() < d + 1 || samples_b.rows() < d + 1) {
    throw std::invalid_argument("frechet_distance: need at least d+1 samples");
  }
  GaussianFit fa = fit_gaussian(samples_a);
  GaussianFit fb = fit_gaussian(samples_b);
  bool reg = false;
  if (near_singular(fa.cov) || near_singular(fb.cov)) {
    reg = true;
    fa.cov += 1e-6 * Eigen::MatrixXd::Identity(d, d);
    fb.cov += 1e-6 * Eigen::MatrixXd::Identity(d, d);
  }
  if (regularized) *regularized = reg;
  const double mean_term = (fa.mean - fb.mean).squaredNorm();
  const double trace_term =
      fa.cov.trace() + fb.cov.trace() - 2.0 * trace_sqrt_product(fa.cov, fb.cov);
  return mean_term + trace_term;
}

PosteriorMatrix posterior_matrix_real(const BatchClassifier& classifier,
                                      const OverlapDataset& dataset,
                                      Index n_per_class, RngStream& data_rng) {
  const int c = dataset.num_classes();
  PosteriorMatrix m;
  m.num_classes = c;
  m.values.assign(static_cast<size_t>(c * c), 0.0);
  for (int j = 0; j < c; ++j) {
    Tensor x = dataset.sample_class_conditional(j, n_per_class, data_rng);
    Tensor s = classifier(x);
    auto sv = s.values();
    for (Index i = 0; i < s.rows(); ++i) {
      for (int k = 0; k < c; ++k) {
        m.values[static_cast<size_t>(j * c + k)] +=
            sv[static_cast<size_t>(i * c + k)];
      }
    }
    for (int k = 0; k < c; ++k) {
      m.values[static_cast<size_t>(j * c + k)] /= static_cast<double>(n_per_class);
    }
  }
  return m;
}

PosteriorMatrix posterior_matrix_pgan(const PGanNets& nets, Index n_per_class,
                                      RngStream& z_rng) {
  const int c = nets.num_classes;
  PosteriorMatrix m;
  m.num_classes = c;
  m.values.assign(static_cast<size_t>(c * c), 0.0);
  NoGradGuard guard;
  for (int j = 0; j < c; ++j) {
    std::vector<double> z(static_cast<size_t>(n_per_class * c));
    for (double& v : z) v = z_rng.normal();
    std::vector<double> y(static_cast<size_t>(n_per_class * c), 0.0);
    for (Index i = 0; i < n_per_class; ++i) y[static_cast<size_t>(i * c + j)] = 1.0;
    Tensor s = pgan_generate(nets, Tensor::from({n_per_class, c}, std::move(z)),
                             Tensor::from({n_per_class, c}, std::move(y)));
    auto sv = s.values();
    for (Index i = 0; i < n_per_class; ++i) {
      for (int k = 0; k < c; ++k) {
        m.values[static_cast<size_t>(j * c + k)] +=
            sv[static_cast<size_t>(i * c + k)];
      }
    }
    for (int k = 0; k < c; ++k) {
      m.values[static_cast<size_t>(j * c + k)] /= static_cast<double>(n_per_class);
    }
  }
  return m;
}

double max_abs_diff(const PosteriorMatrix& a, const PosteriorMatrix& b) {
  if (a.num_classes != b.num_classes) {
    throw std::invalid_argument("posterior matrices have different sizes");
  }
  double mx = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    mx = std::max(mx, std::abs(a.values[i] - b.values[i]));
  }
  return mx;
}

std::vector<std::array<double, 2>> interpolate(const GeneratorNet& net,
                                               const ConditionState& from,
                                               const ConditionState& to,
                                               int steps, const Tensor& z_row) {
  if (steps < 2) throw std::invalid_argument("interpolate: steps must be >= 2");
  if (z_row.rows() != 1) {
    throw ShapeError("interpolate: z must be a single row, got " +
                     shape_str(z_row.shape()));
  }
  const size_t c = from.vector.size();
  if (to.vector.size() != c) {
    throw std::invalid_argument("interpolate: states have different class counts");
  }
  NoGradGuard guard;
  std::vector<std::array<double, 2>> trace;
  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(steps - 1);
    std::vector<double> cond(c);
    for (size_t j = 0; j < c; ++j) {
      cond[j] = (1.0 - t) * from.vector[j] + t * to.vector[j];
    }
    Tensor out = generate(net, z_row,
                          Tensor::from({1, static_cast<Index>(c)}, std::move(cond)));
    trace.push_back({out.at(0), out.at(1)});
  }
  return trace;
}

EntropyProfile posterior_entropy_profile(const Tensor& samples,
                                         const OverlapDataset& oracle) {
  const Index n = samples.rows();
  if (n < 1) throw std::invalid_argument("posterior_entropy_profile: empty sample set");
  auto v = samples.values();
  std::vector<double> ent(static_cast<size_t>(n));
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    ent[static_cast<size_t>(i)] = oracle.posterior_entropy(
        {v[static_cast<size_t>(2 * i)], v[static_cast<size_t>(2 * i + 1)]});
    sum += ent[static_cast<size_t>(i)];
  }
  std::sort(ent.begin(), ent.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, static_cast<size_t>(n - 1));
    const double frac = pos - static_cast<double>(lo);
    return ent[lo] * (1.0 - frac) + ent[hi] * frac;
  };
  EntropyProfile p;
  p.mean = sum / static_cast<double>(n);
  p.q10 = quantile(0.10);
  p.q25 = quantile(0.25);
  p.q50 = quantile(0.50);
  p.q75 = quantile(0.75);
  p.q90 = quantile(0.90);
  p.n = n;
  return p;
}

}  // namespace ogan
