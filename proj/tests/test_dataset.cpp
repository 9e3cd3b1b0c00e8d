#include <doctest.h>

#include <cmath>
#include <numbers>

#include "overlapgan/dataset.hpp"

using namespace ogan;

TEST_CASE("toy Bayes posterior closed forms") {
  OverlapDataset toy = build_two_gaussian_toy();
  auto at_origin = toy.bayes_posterior({0.0, 0.0});
  CHECK(at_origin[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(at_origin[1] == doctest::Approx(0.5).epsilon(1e-12));

  auto deep_tail = toy.bayes_posterior({-10.0, 0.0});
  CHECK(deep_tail[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(deep_tail[1] < 1e-8);

  // Analytic Gaussian ratio at (0.5, 0): p(A) = 1 / (1 + e).
  auto mid = toy.bayes_posterior({0.5, 0.0});
  CHECK(mid[0] == doctest::Approx(1.0 / (1.0 + std::numbers::e)).epsilon(1e-12));
  CHECK(mid[1] == doctest::Approx(std::numbers::e / (1.0 + std::numbers::e)).epsilon(1e-12));
}

TEST_CASE("bayes posterior stays on the simplex") {
  OverlapDataset ring = build_ring_overlap(10, "10to5");
  RngStream rng(3, "pts");
  for (int i = 0; i < 200; ++i) {
    auto p = ring.bayes_posterior(
        {rng.uniform_range(-8.0, 8.0), rng.uniform_range(-8.0, 8.0)});
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("far-away points report underflow with a uniform posterior") {
  OverlapDataset toy = build_two_gaussian_toy();
  bool underflow = false;
  auto p = toy.bayes_posterior({1e6, 1e6}, &underflow);
  CHECK(underflow);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
}

TEST_CASE("ring memberships follow the published relabelings") {
  OverlapDataset ring10 = build_ring_overlap(10, "10to5");
  const auto& m10 = ring10.scheme().membership;
  CHECK(m10[1] == std::vector<int>{0, 1});  // component 1 lies in A and B
  CHECK(m10[0] == std::vector<int>{0});
  CHECK(m10[9] == std::vector<int>{0, 4});  // shared by A and E

  // Every class contains exactly 3 components; all 10 components covered.
  std::vector<int> per_class(5, 0);
  int covered = 0;
  for (const auto& m : m10) {
    CHECK(!m.empty());
    ++covered;
    for (int cls : m) per_class[static_cast<size_t>(cls)] += 1;
  }
  CHECK(covered == 10);
  for (int count : per_class) CHECK(count == 3);

  OverlapDataset ring7 = build_ring_overlap(7, "7to3");
  const auto& m7 = ring7.scheme().membership;
  CHECK(m7[0] == std::vector<int>{0});
  CHECK(m7[1] == std::vector<int>{0, 1});
  CHECK(m7[6] == std::vector<int>{0, 1, 2});  // triple overlap

  CHECK_THROWS_AS(build_ring_overlap(10, "10to4"), std::invalid_argument);
  CHECK_THROWS_AS(build_ring_overlap(9, "10to5"), std::invalid_argument);
}

TEST_CASE("scheme validation rejects empty classes and orphan components") {
  std::vector<FineComponent> comps(2);
  comps[0] = {0, {-1.0, 0.0}, {1, 0, 0, 1}, 0.5};
  comps[1] = {1, {1.0, 0.0}, {1, 0, 0, 1}, 0.5};

  OverlapScheme orphan;
  orphan.num_classes = 2;
  orphan.membership = {{0, 1}, {}};
  CHECK_THROWS_AS(OverlapDataset(comps, orphan), std::invalid_argument);

  OverlapScheme empty_class;
  empty_class.num_classes = 3;
  empty_class.membership = {{0}, {1}};
  CHECK_THROWS_AS(OverlapDataset(comps, empty_class), std::invalid_argument);
}

TEST_CASE("sampling statistics match the mixture") {
  OverlapDataset toy = build_two_gaussian_toy();
  RngStream rng(11, "batch");
  const Index n = 100000;
  LabeledBatch b = toy.sample_batch(n, rng);

  Index class_a = 0;
  double mean_a_x = 0.0, mean_a_y = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (b.labels[static_cast<size_t>(i)] == 0) {
      ++class_a;
      mean_a_x += b.x.at(2 * i);
      mean_a_y += b.x.at(2 * i + 1);
    }
  }
  const double frac = static_cast<double>(class_a) / n;
  const double sigma = std::sqrt(0.25 / n);
  CHECK(std::abs(frac - 0.5) < 3.0 * sigma);

  // Law of large numbers: class-A sample mean approaches the A component mean.
  mean_a_x /= static_cast<double>(class_a);
  mean_a_y /= static_cast<double>(class_a);
  const double se = 3.0 / std::sqrt(static_cast<double>(class_a));
  CHECK(std::abs(mean_a_x - -1.0) < se);
  CHECK(std::abs(mean_a_y - 0.0) < se);
}

TEST_CASE("mutual components split labels uniformly") {
  OverlapDataset ring = build_ring_overlap(10, "10to5");
  RngStream rng(13, "batch");
  const Index n = 100000;
  LabeledBatch b = ring.sample_batch(n, rng);
  Index comp1 = 0, comp1_a = 0;
  for (Index i = 0; i < n; ++i) {
    if (b.fine[static_cast<size_t>(i)] == 1) {
      ++comp1;
      if (b.labels[static_cast<size_t>(i)] == 0) ++comp1_a;
    }
  }
  CHECK(comp1 > 8000);  // ~ n/10 draws of component 1
  const double frac = static_cast<double>(comp1_a) / static_cast<double>(comp1);
  const double sigma = std::sqrt(0.25 / static_cast<double>(comp1));
  CHECK(std::abs(frac - 0.5) < 3.0 * sigma);
}

TEST_CASE("sampling is reproducible from the seed") {
  OverlapDataset toy = build_two_gaussian_toy();
  RngStream a(21, "batch");
  RngStream b(21, "batch");
  LabeledBatch ba = toy.sample_batch(1000, a);
  LabeledBatch bb = toy.sample_batch(1000, b);
  for (Index i = 0; i < ba.x.size(); ++i) CHECK(ba.x.at(i) == bb.x.at(i));
  CHECK(ba.labels == bb.labels);
  CHECK(ba.fine == bb.fine);
}

TEST_CASE("ring posterior at a mutual component mean") {
  OverlapDataset ring = build_ring_overlap(10, "10to5");
  const auto& comp1 = ring.components()[1];
  auto p = ring.bayes_posterior(comp1.mean);
  // Mass splits between A and B; other classes are ring-separated.
  CHECK(p[0] == doctest::Approx(0.5).epsilon(0.02));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(0.02));
  CHECK(p[2] + p[3] + p[4] < 0.02);
}

TEST_CASE("ball-conditioned label frequencies converge to the Bayes posterior") {
  OverlapDataset toy = build_two_gaussian_toy();
  const std::array<double, 2> center{0.3, 0.0};
  const double radius = 0.05;
  RngStream rng(5, "ball");
  // Draw 1e5-sample batches until enough points land in the ball for the
  // conditional frequency to resolve the stated tolerance.
  Index inside = 0, inside_a = 0;
  while (inside < 2000) {
    LabeledBatch b = toy.sample_batch(100000, rng);
    for (Index i = 0; i < 100000; ++i) {
      const double dx = b.x.at(2 * i) - center[0];
      const double dy = b.x.at(2 * i + 1) - center[1];
      if (dx * dx + dy * dy <= radius * radius) {
        ++inside;
        if (b.labels[static_cast<size_t>(i)] == 0) ++inside_a;
      }
    }
  }
  const double freq = static_cast<double>(inside_a) / static_cast<double>(inside);
  const double expected = toy.bayes_posterior(center)[0];
  CHECK(std::abs(freq - expected) < 0.05);
}

TEST_CASE("noise and categorical samplers") {
  RngStream rng(31, "noise");
  const Index n = 100000;
  Tensor z = sample_noise(n, 2, rng);
  double mean0 = 0.0, mean1 = 0.0, var0 = 0.0, var1 = 0.0;
  for (Index i = 0; i < n; ++i) {
    mean0 += z.at(2 * i);
    mean1 += z.at(2 * i + 1);
  }
  mean0 /= n;
  mean1 /= n;
  for (Index i = 0; i < n; ++i) {
    var0 += (z.at(2 * i) - mean0) * (z.at(2 * i) - mean0);
    var1 += (z.at(2 * i + 1) - mean1) * (z.at(2 * i + 1) - mean1);
  }
  var0 /= n - 1;
  var1 /= n - 1;
  CHECK(std::abs(mean0) < 3.0 / std::sqrt(n));
  CHECK(std::abs(mean1) < 3.0 / std::sqrt(n));
  CHECK(std::abs(var0 - 1.0) < 0.05);
  CHECK(std::abs(var1 - 1.0) < 0.05);

  std::vector<int> labels;
  Tensor y = sample_categorical(n, 5, rng, &labels);
  std::vector<Index> counts(5, 0);
  for (int label : labels) counts[static_cast<size_t>(label)] += 1;
  const double sigma = std::sqrt(0.2 * 0.8 / n);
  for (Index count : counts) {
    CHECK(std::abs(static_cast<double>(count) / n - 0.2) < 3.0 * sigma);
  }
  for (Index i = 0; i < 50; ++i) {
    CHECK(y.at(i * 5 + labels[static_cast<size_t>(i)]) == 1.0);
  }
  CHECK_THROWS_AS(sample_noise(0, 2, rng), std::invalid_argument);
}

TEST_CASE("class letters") {
  CHECK(class_letter(0) == "A");
  CHECK(class_letter(4) == "E");
  CHECK(class_index_from_letter("C", 5) == 2);
  CHECK_THROWS_AS(class_index_from_letter("Z", 5), std::invalid_argument);
}
