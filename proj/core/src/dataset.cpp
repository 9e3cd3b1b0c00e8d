#include "overlapgan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

namespace ogan {

void OverlapScheme::validate(int num_components) const {
  if (num_classes < 1) throw std::invalid_argument("scheme: no coarse classes");
  if (static_cast<int>(membership.size()) != num_components) {
    throw std::invalid_argument("scheme: membership rows " +
                                std::to_string(membership.size()) +
                                " != components " + std::to_string(num_components));
  }
  std::vector<bool> class_used(static_cast<size_t>(num_classes), false);
  for (size_t i = 0; i < membership.size(); ++i) {
    if (membership[i].empty()) {
      throw std::invalid_argument("scheme: component " + std::to_string(i) +
                                  " belongs to no class");
    }
    std::set<int> uniq(membership[i].begin(), membership[i].end());
    if (uniq.size() != membership[i].size()) {
      throw std::invalid_argument("scheme: duplicate class in membership of component " +
                                  std::to_string(i));
    }
    for (int cls : membership[i]) {
      if (cls < 0 || cls >= num_classes) {
        throw std::invalid_argument("scheme: class id " + std::to_string(cls) +
                                    " out of range");
      }
      class_used[static_cast<size_t>(cls)] = true;
    }
  }
  for (int j = 0; j < num_classes; ++j) {
    if (!class_used[static_cast<size_t>(j)]) {
      throw std::invalid_argument("scheme: class " + class_letter(j) +
                                  " contains no component");
    }
  }
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::array<double, 3> cholesky2(const std::array<double, 4>& cov) {
  const double a = cov[0], b = cov[1], bt = cov[2], c = cov[3];
  if (std::abs(b - bt) > 1e-12) {
    throw std::invalid_argument("component covariance is not symmetric");
  }
  if (a <= 0.0 || a * c - b * b <= 0.0) {
    throw std::invalid_argument("component covariance is not positive-definite");
  }
  const double l11 = std::sqrt(a);
  const double l21 = b / l11;
  const double l22 = std::sqrt(c - l21 * l21);
  return {l11, l21, l22};
}

// log N(x; mean, cov) for the 2-D Gaussian with Cholesky (l11, l21, l22).
double log_density2(const std::array<double, 2>& x, const FineComponent& comp,
                    const std::array<double, 3>& chol) {
  const double dx = x[0] - comp.mean[0];
  const double dy = x[1] - comp.mean[1];
  // Solve L u = d.
  const double u0 = dx / chol[0];
  const double u1 = (dy - chol[1] * u0) / chol[2];
  const double quad = u0 * u0 + u1 * u1;
  const double log_det = 2.0 * (std::log(chol[0]) + std::log(chol[2]));
  return -0.5 * quad - 0.5 * log_det - std::log(kTwoPi);
}

}  // namespace

OverlapDataset::OverlapDataset(std::vector<FineComponent> components,
                               OverlapScheme scheme)
    : components_(std::move(components)), scheme_(std::move(scheme)) {
  if (components_.empty()) {
    throw std::invalid_argument("dataset: no components");
  }
  scheme_.validate(static_cast<int>(components_.size()));
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.weight <= 0.0) throw std::invalid_argument("dataset: non-positive weight");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("dataset: weights sum to " + std::to_string(total));
  }
  double acc = 0.0;
  for (const auto& c : components_) {
    acc += c.weight;
    cum_weights_.push_back(acc);
    chol_.push_back(cholesky2(c.cov));
  }
  cum_weights_.back() = 1.0;
}

LabeledBatch OverlapDataset::sample_batch(Index n, RngStream& rng) const {
  if (n < 1) throw std::invalid_argument("sample_batch: n must be >= 1");
  const int c = num_classes();
  std::vector<double> xs(static_cast<size_t>(n * 2));
  std::vector<double> ys(static_cast<size_t>(n * c), 0.0);
  LabeledBatch batch;
  batch.fine.resize(static_cast<size_t>(n));
  batch.labels.resize(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const size_t k = static_cast<size_t>(
        std::lower_bound(cum_weights_.begin(), cum_weights_.end(), u) -
        cum_weights_.begin());
    const auto& comp = components_[k];
    const auto& L = chol_[k];
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    xs[static_cast<size_t>(2 * i)] = comp.mean[0] + L[0] * z0;
    xs[static_cast<size_t>(2 * i + 1)] = comp.mean[1] + L[1] * z0 + L[2] * z1;
    const auto& member = scheme_.membership[k];
    const int label = member[rng.below(member.size())];
    ys[static_cast<size_t>(i * c + label)] = 1.0;
    batch.fine[static_cast<size_t>(i)] = static_cast<int>(k);
    batch.labels[static_cast<size_t>(i)] = label;
  }
  batch.x = Tensor::from({n, 2}, std::move(xs));
  batch.y = Tensor::from({n, c}, std::move(ys));
  return batch;
}

Tensor OverlapDataset::sample_class_conditional(int cls, Index n,
                                                RngStream& rng) const {
  if (cls < 0 || cls >= num_classes()) {
    throw std::invalid_argument("sample_class_conditional: class " +
                                std::to_string(cls) + " out of range");
  }
  std::vector<size_t> members;
  std::vector<double> cum;
  double total = 0.0;
  for (size_t i = 0; i < components_.size(); ++i) {
    const auto& m = scheme_.membership[i];
    if (std::find(m.begin(), m.end(), cls) == m.end()) continue;
    members.push_back(i);
    total += components_[i].weight / static_cast<double>(m.size());
    cum.push_back(total);
  }
  for (double& v : cum) v /= total;
  cum.back() = 1.0;
  std::vector<double> xs(static_cast<size_t>(n * 2));
  for (Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const size_t pick = static_cast<size_t>(
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    const size_t k = members[pick];
    const auto& comp = components_[k];
    const auto& L = chol_[k];
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    xs[static_cast<size_t>(2 * i)] = comp.mean[0] + L[0] * z0;
    xs[static_cast<size_t>(2 * i + 1)] = comp.mean[1] + L[1] * z0 + L[2] * z1;
  }
  return Tensor::from({n, 2}, std::move(xs));
}

Tensor OverlapDataset::sample_component(int component, Index n,
                                        RngStream& rng) const {
  if (component < 0 || component >= num_components()) {
    throw std::invalid_argument("sample_component: component " +
                                std::to_string(component) + " out of range");
  }
  const auto& comp = components_[static_cast<size_t>(component)];
  const auto& L = chol_[static_cast<size_t>(component)];
  std::vector<double> xs(static_cast<size_t>(n * 2));
  for (Index i = 0; i < n; ++i) {
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    xs[static_cast<size_t>(2 * i)] = comp.mean[0] + L[0] * z0;
    xs[static_cast<size_t>(2 * i + 1)] = comp.mean[1] + L[1] * z0 + L[2] * z1;
  }
  return Tensor::from({n, 2}, std::move(xs));
}

std::vector<double> OverlapDataset::bayes_posterior(const std::array<double, 2>& x,
                                                    bool* underflow) const {
  const int c = num_classes();
  const size_t k = components_.size();
  std::vector<double> logd(k);
  double max_log = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < k; ++i) {
    logd[i] = std::log(components_[i].weight) + log_density2(x, components_[i], chol_[i]);
    max_log = std::max(max_log, logd[i]);
  }
  std::vector<double> post(static_cast<size_t>(c), 0.0);
  if (underflow) *underflow = false;
  if (!std::isfinite(max_log) || max_log < -700.0) {
    // Every density underflows; report the uninformative posterior.
    if (underflow) *underflow = true;
    std::fill(post.begin(), post.end(), 1.0 / c);
    return post;
  }
  double total = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const double r = std::exp(logd[i] - max_log);
    const auto& member = scheme_.membership[i];
    const double share = r / static_cast<double>(member.size());
    for (int cls : member) post[static_cast<size_t>(cls)] += share;
    total += r;
  }
  for (double& p : post) p /= total;
  return post;
}

Tensor OverlapDataset::bayes_posterior_batch(const Tensor& x) const {
  const Index n = x.rows();
  const int c = num_classes();
  std::vector<double> out(static_cast<size_t>(n * c));
  auto xv = x.values();
  for (Index i = 0; i < n; ++i) {
    auto p = bayes_posterior({xv[static_cast<size_t>(2 * i)],
                              xv[static_cast<size_t>(2 * i + 1)]});
    std::copy(p.begin(), p.end(), out.begin() + i * c);
  }
  return Tensor::from({n, c}, std::move(out));
}

std::vector<double> OverlapDataset::fine_responsibilities(
    const std::array<double, 2>& x) const {
  const size_t k = components_.size();
  std::vector<double> r(k);
  double max_log = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < k; ++i) {
    r[i] = std::log(components_[i].weight) + log_density2(x, components_[i], chol_[i]);
    max_log = std::max(max_log, r[i]);
  }
  double total = 0.0;
  for (size_t i = 0; i < k; ++i) {
    r[i] = std::exp(r[i] - max_log);
    total += r[i];
  }
  for (double& v : r) v /= total;
  return r;
}

int OverlapDataset::oracle_component(const std::array<double, 2>& x) const {
  auto r = fine_responsibilities(x);
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

double OverlapDataset::posterior_entropy(const std::array<double, 2>& x) const {
  auto p = bayes_posterior(x);
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

OverlapDataset build_two_gaussian_toy() {
  std::vector<FineComponent> comps(2);
  comps[0] = {0, {-1.0, 0.0}, {1.0, 0.0, 0.0, 1.0}, 0.5};
  comps[1] = {1, {1.0, 0.0}, {1.0, 0.0, 0.0, 1.0}, 0.5};
  OverlapScheme scheme;
  scheme.num_classes = 2;
  scheme.membership = {{0}, {1}};
  return OverlapDataset(std::move(comps), std::move(scheme));
}

OverlapDataset build_ring_overlap(int k_fine, const std::string& scheme_name) {
  OverlapScheme scheme;
  if (scheme_name == "10to5") {
    if (k_fine != 10) {
      throw std::invalid_argument("10to5 requires k_fine = 10, got " +
                                  std::to_string(k_fine));
    }
    // A={9,0,1} B={1,2,3} C={3,4,5} D={5,6,7} E={7,8,9}: even components are
    // class-distinct, odd ones sit in the adjacent-class overlap.
    scheme.num_classes = 5;
    scheme.membership = {{0},    {0, 1}, {1},    {1, 2}, {2},
                         {2, 3}, {3},    {3, 4}, {4},    {0, 4}};
  } else if (scheme_name == "7to3") {
    if (k_fine != 7) {
      throw std::invalid_argument("7to3 requires k_fine = 7, got " +
                                  std::to_string(k_fine));
    }
    // A={0,1,5,6} B={1,2,3,6} C={3,4,5,6}: distinct 0/2/4, pairwise 1/3/5,
    // and 6 shared by all three classes.
    scheme.num_classes = 3;
    scheme.membership = {{0}, {0, 1}, {1}, {1, 2}, {2}, {0, 2}, {0, 1, 2}};
  } else {
    throw std::invalid_argument("unknown overlap scheme: " + scheme_name);
  }
  std::vector<FineComponent> comps(static_cast<size_t>(k_fine));
  const double radius = 4.0;
  for (int i = 0; i < k_fine; ++i) {
    const double angle = kTwoPi * i / k_fine;
    comps[static_cast<size_t>(i)] = {
        i,
        {radius * std::cos(angle), radius * std::sin(angle)},
        {1.0, 0.0, 0.0, 1.0},
        1.0 / k_fine};
  }
  return OverlapDataset(std::move(comps), std::move(scheme));
}

Tensor sample_noise(Index n, Index dim, RngStream& rng) {
  if (n < 1 || dim < 1) throw std::invalid_argument("sample_noise: n, dim >= 1");
  std::vector<double> out(static_cast<size_t>(n * dim));
  for (double& v : out) v = rng.normal();
  return Tensor::from({n, dim}, std::move(out));
}

Tensor sample_categorical(Index n, int c, RngStream& rng,
                          std::vector<int>* out_labels) {
  if (n < 1 || c < 1) throw std::invalid_argument("sample_categorical: n, c >= 1");
  std::vector<double> out(static_cast<size_t>(n * c), 0.0);
  if (out_labels) out_labels->resize(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    out[static_cast<size_t>(i * c + label)] = 1.0;
    if (out_labels) (*out_labels)[static_cast<size_t>(i)] = label;
  }
  return Tensor::from({n, c}, std::move(out));
}

std::string class_letter(int idx) {
  std::string s;
  do {
    s.insert(s.begin(), static_cast<char>('A' + idx % 26));
    idx = idx / 26 - 1;
  } while (idx >= 0);
  return s;
}

int class_index_from_letter(const std::string& letter, int num_classes) {
  for (int i = 0; i < num_classes; ++i) {
    if (class_letter(i) == letter) return i;
  }
  throw std::invalid_argument("unknown class label: " + letter);
}

}  // namespace ogan
