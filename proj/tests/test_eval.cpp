#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "overlapgan/dataset.hpp"
#include "overlapgan/eval.hpp"
#include "overlapgan/nets.hpp"
#include "overlapgan/rng.hpp"

using namespace ogan;

namespace {

Tensor gaussian_cloud(Index n, double mx, double my, double sigma, RngStream& rng) {
  std::vector<double> v(static_cast<size_t>(n * 2));
  for (Index i = 0; i < n; ++i) {
    v[static_cast<size_t>(2 * i)] = mx + sigma * rng.normal();
    v[static_cast<size_t>(2 * i + 1)] = my + sigma * rng.normal();
  }
  return Tensor::from({n, 2}, std::move(v));
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

// Quadrature oracle for the toy expected posterior entropy: both the mixture
// density and the posterior depend only on x0.
double toy_entropy_quadrature() {
  const double lo = -12.0, hi = 12.0;
  const int steps = 48000;
  const double h = (hi - lo) / steps;
  auto integrand = [](double t) {
    const double phi_a = std::exp(-0.5 * (t + 1.0) * (t + 1.0));
    const double phi_b = std::exp(-0.5 * (t - 1.0) * (t - 1.0));
    const double density = 0.5 * (phi_a + phi_b) / std::sqrt(2.0 * M_PI);
    const double post_a = phi_a / (phi_a + phi_b);
    return density * binary_entropy(post_a);
  };
  // Simpson's rule.
  double acc = integrand(lo) + integrand(hi);
  for (int i = 1; i < steps; ++i) {
    acc += integrand(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

// E_{x ~ A}[p(B | x)] for the toy: 1-D Gauss quadrature over x0.
double toy_confusion_quadrature() {
  const double lo = -12.0, hi = 12.0;
  const int steps = 48000;
  const double h = (hi - lo) / steps;
  auto integrand = [](double t) {
    const double density = std::exp(-0.5 * (t + 1.0) * (t + 1.0)) /
                           std::sqrt(2.0 * M_PI);  // x ~ component A
    const double phi_a = std::exp(-0.5 * (t + 1.0) * (t + 1.0));
    const double phi_b = std::exp(-0.5 * (t - 1.0) * (t - 1.0));
    return density * (phi_b / (phi_a + phi_b));
  };
  double acc = integrand(lo) + integrand(hi);
  for (int i = 1; i < steps; ++i) {
    acc += integrand(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("enumerate_states per scheme") {
  auto toy_states = enumerate_states(build_two_gaussian_toy().scheme());
  CHECK(toy_states.size() == 2);
  CHECK(toy_states[0].name == "A");
  CHECK(toy_states[0].vector == std::vector<double>{1.0, 0.0});

  auto ring10 = enumerate_states(build_ring_overlap(10, "10to5").scheme());
  CHECK(ring10.size() == 10);
  int distinct = 0, mutual = 0;
  for (const auto& st : ring10) {
    if (st.classes.size() == 1) ++distinct;
    if (st.classes.size() == 2) ++mutual;
  }
  CHECK(distinct == 5);
  CHECK(mutual == 5);
  CHECK(ring10[1].name == "A&B");
  CHECK(ring10[1].vector == std::vector<double>{0.5, 0.5, 0, 0, 0});
  CHECK(ring10[1].expected_component == 1);

  auto ring7 = enumerate_states(build_ring_overlap(7, "7to3").scheme());
  CHECK(ring7.size() == 7);
  int triple = 0;
  for (const auto& st : ring7) {
    if (st.classes.size() == 3) ++triple;
  }
  CHECK(triple == 1);
  CHECK(ring7[6].name == "A&B&C");
  for (double v : ring7[6].vector) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("dma oracle self-test on the separated ring") {
  OverlapDataset ring = build_ring_overlap(10, "10to5");
  auto states = enumerate_states(ring.scheme());
  RngHub hub(3);
  // Replaying real samples of the expected component scores that component's
  // Bayes self-consistency rate (about 0.78 at the ring's neighbor spacing).
  StateSampler replay = [&](const ConditionState& st, Index n) {
    return ring.sample_component(st.expected_component, n, hub.stream("replay"));
  };
  const Index n_per_state = 4000;
  DmaResult r = dma_with_sampler(ring, states, replay, n_per_state);

  // Independent Monte-Carlo estimate of the same per-component rate.
  const double sigma = std::sqrt(0.25 / n_per_state);
  for (size_t i = 0; i < states.size(); ++i) {
    Index hits = 0;
    Tensor pts = ring.sample_component(states[i].expected_component, n_per_state,
                                       hub.stream("mc"));
    for (Index k = 0; k < n_per_state; ++k) {
      if (ring.oracle_component({pts.at(2 * k), pts.at(2 * k + 1)}) ==
          states[i].expected_component) {
        ++hits;
      }
    }
    const double mc = static_cast<double>(hits) / n_per_state;
    CHECK(std::abs(r.per_state[i] - mc) < 6.0 * sigma);
    CHECK(r.per_state[i] > 0.7);
  }
  CHECK(r.mean > 0.7);
  CHECK(r.mean <= 1.0);

  // A constant far-away point hits at most one state.
  StateSampler constant = [&](const ConditionState&, Index n) {
    return Tensor::full({n, 2}, 50.0);
  };
  DmaResult c = dma_with_sampler(ring, states, constant, 100);
  int nonzero = 0;
  for (double acc : c.per_state) {
    if (acc > 0.0) ++nonzero;
  }
  CHECK(nonzero <= 1);

  // Permuting state order leaves the mean unchanged.
  auto shuffled = states;
  std::reverse(shuffled.begin(), shuffled.end());
  DmaResult r2 = dma_with_sampler(ring, shuffled, replay, n_per_state);
  CHECK(std::abs(r2.mean - r.mean) < 0.05);
}

TEST_CASE("uniform generator matches the Voronoi-share oracle") {
  OverlapDataset toy = build_two_gaussian_toy();
  auto states = enumerate_states(toy.scheme());
  RngHub hub(5);
  const double lo = -4.0, hi = 4.0;
  StateSampler uniform = [&](const ConditionState&, Index n) {
    std::vector<double> v(static_cast<size_t>(n * 2));
    for (double& e : v) e = hub.stream("box").uniform_range(lo, hi);
    return Tensor::from({n, 2}, std::move(v));
  };
  DmaResult r = dma_with_sampler(toy, states, uniform, 20000);
  // Symmetric components split the box evenly.
  for (double acc : r.per_state) CHECK(acc == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("frechet closed forms") {
  RngHub hub(7);
  Tensor a = gaussian_cloud(5000, 0, 0, 1, hub.stream("a"));
  CHECK(frechet_distance(a, a) == doctest::Approx(0.0).epsilon(1e-9));

  // Shifted copy: covariances cancel exactly, distance = ||v||^2.
  std::vector<double> shifted(a.values().begin(), a.values().end());
  for (size_t i = 0; i < shifted.size(); i += 2) {
    shifted[i] += 3.0;
    shifted[i + 1] -= 1.0;
  }
  Tensor b = Tensor::from({5000, 2}, std::move(shifted));
  CHECK(frechet_distance(a, b) == doctest::Approx(10.0).epsilon(1e-9));

  // N(0, I) vs N(0, 4I): population distance = 2.
  Tensor wide = gaussian_cloud(10000, 0, 0, 2, hub.stream("b"));
  Tensor narrow = gaussian_cloud(10000, 0, 0, 1, hub.stream("c"));
  const double d = frechet_distance(narrow, wide);
  CHECK(d == doctest::Approx(2.0).epsilon(0.10));

  // Symmetry.
  CHECK(std::abs(frechet_distance(narrow, wide) - frechet_distance(wide, narrow)) <
        1e-9);
}

TEST_CASE("frechet regularizes singular covariances and flags it") {
  Tensor degenerate = Tensor::from({10, 2}, [] {
    std::vector<double> v(20);
    for (int i = 0; i < 10; ++i) {
      v[static_cast<size_t>(2 * i)] = i;        // x1 = x0: rank-1 cloud
      v[static_cast<size_t>(2 * i + 1)] = i;
    }
    return v;
  }());
  bool flagged = false;
  const double d = frechet_distance(degenerate, degenerate, &flagged);
  CHECK(flagged);
  CHECK(d == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("frechet general-dimension route agrees with the mean-shift form") {
  RngStream rng(11, "3d");
  const Index n = 20000;
  std::vector<double> va(static_cast<size_t>(n * 3)), vb(static_cast<size_t>(n * 3));
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) {
      va[static_cast<size_t>(3 * i + j)] = rng.normal();
      vb[static_cast<size_t>(3 * i + j)] = rng.normal() + (j == 0 ? 2.0 : 0.0);
    }
  }
  const double d = frechet_distance(Tensor::from({n, 3}, std::move(va)),
                                    Tensor::from({n, 3}, std::move(vb)));
  CHECK(d == doctest::Approx(4.0).epsilon(0.10));
}

TEST_CASE("frechet input validation") {
  RngHub hub(13);
  Tensor a = gaussian_cloud(2, 0, 0, 1, hub.stream("a"));
  Tensor b = gaussian_cloud(100, 0, 0, 1, hub.stream("b"));
  CHECK_THROWS_AS(frechet_distance(a, b), std::invalid_argument);  // < d+1 rows
}

TEST_CASE("posterior matrix from the Bayes classifier") {
  // Far-separated classes: identity matrix up to sampling noise.
  std::vector<FineComponent> comps(2);
  comps[0] = {0, {-10.0, 0.0}, {1, 0, 0, 1}, 0.5};
  comps[1] = {1, {10.0, 0.0}, {1, 0, 0, 1}, 0.5};
  OverlapScheme scheme;
  scheme.num_classes = 2;
  scheme.membership = {{0}, {1}};
  OverlapDataset separated(comps, scheme);
  RngHub hub(17);
  BatchClassifier bayes_sep = [&](const Tensor& x) {
    return separated.bayes_posterior_batch(x);
  };
  PosteriorMatrix identity =
      posterior_matrix_real(bayes_sep, separated, 2000, hub.stream("data"));
  CHECK(identity.at(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(identity.at(1, 1) == doctest::Approx(1.0).epsilon(1e-6));

  // Overlapping toy: off-diagonal mass equals the analytic overlap integral.
  OverlapDataset toy = build_two_gaussian_toy();
  BatchClassifier bayes_toy = [&](const Tensor& x) {
    return toy.bayes_posterior_batch(x);
  };
  PosteriorMatrix m =
      posterior_matrix_real(bayes_toy, toy, 200000, hub.stream("data2"));
  const double q = toy_confusion_quadrature();
  CHECK(m.at(0, 1) == doctest::Approx(q).epsilon(0.02));
  CHECK(m.at(0, 0) == doctest::Approx(1.0 - q).epsilon(0.02));

  // Ring: row A mass confined to membership-overlapping columns {A, B, E}.
  OverlapDataset ring = build_ring_overlap(10, "10to5");
  BatchClassifier bayes_ring = [&](const Tensor& x) {
    return ring.bayes_posterior_batch(x);
  };
  PosteriorMatrix rm =
      posterior_matrix_real(bayes_ring, ring, 20000, hub.stream("data3"));
  for (int row = 0; row < 5; ++row) {
    double off_support = 0.0;
    for (int col = 0; col < 5; ++col) {
      const bool support = col == row || col == (row + 1) % 5 || col == (row + 4) % 5;
      if (!support) off_support += rm.at(row, col);
    }
    CHECK(off_support < 0.02);
  }
  // Rows remain on the simplex.
  for (int row = 0; row < 5; ++row) {
    double sum = 0.0;
    for (int col = 0; col < 5; ++col) sum += rm.at(row, col);
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("interpolate endpoints equal plain generate calls") {
  RngHub hub(19);
  GeneratorNet g = make_generator(2, 2, 16, 2, hub.stream("init"));
  auto states = enumerate_states(build_two_gaussian_toy().scheme());
  Tensor z = sample_noise(1, 2, hub.stream("z"));

  auto trace = interpolate(g, states[0], states[1], 2, z);
  REQUIRE(trace.size() == 2);
  NoGradGuard guard;
  Tensor from_direct = generate(g, z, Tensor::from({1, 2}, {1.0, 0.0}));
  Tensor to_direct = generate(g, z, Tensor::from({1, 2}, {0.0, 1.0}));
  CHECK(trace[0][0] == from_direct.at(0));
  CHECK(trace[0][1] == from_direct.at(1));
  CHECK(trace[1][0] == to_direct.at(0));
  CHECK(trace[1][1] == to_direct.at(1));

  auto longer = interpolate(g, states[0], states[1], 11, z);
  CHECK(longer.size() == 11);
  CHECK(longer.front()[0] == from_direct.at(0));
  CHECK(longer.back()[1] == to_direct.at(1));
  CHECK_THROWS_AS(interpolate(g, states[0], states[1], 1, z), std::invalid_argument);
}

TEST_CASE("entropy profile closed forms and the Monte Carlo reference") {
  OverlapDataset toy = build_two_gaussian_toy();

  // Points on the symmetry axis carry exactly ln 2 nats.
  Tensor axis = Tensor::from({3, 2}, {0, -1, 0, 0, 0, 2});
  EntropyProfile on_axis = posterior_entropy_profile(axis, toy);
  CHECK(on_axis.mean == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(on_axis.q50 == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Deep-tail points are nearly deterministic.
  Tensor tail = Tensor::full({3, 2}, -12.0);
  CHECK(posterior_entropy_profile(tail, toy).mean < 1e-6);

  // The real-data reference profile agrees with the quadrature oracle.
  RngHub hub(23);
  LabeledBatch b = toy.sample_batch(100000, hub.stream("data"));
  EntropyProfile mc = posterior_entropy_profile(b.x, toy);
  const double expected = toy_entropy_quadrature();
  CHECK(mc.mean == doctest::Approx(expected).epsilon(0.02));
}
