#include <doctest.h>

#include <cmath>

#include "overlapgan/nets.hpp"

using namespace ogan;

TEST_CASE("generate is deterministic and finite from fresh weights") {
  RngHub hub(1);
  GeneratorNet g = make_generator(2, 2, 32, 2, hub.stream("init/g"));
  Tensor z = Tensor::from({2, 2}, {0.3, -0.7, 0.3, -0.7});
  Tensor cond = Tensor::from({2, 2}, {0.5, 0.5, 0.5, 0.5});
  Tensor out1 = generate(g, z, cond);
  Tensor out2 = generate(g, z, cond);
  CHECK(out1.shape() == Shape{2, 2});
  for (Index i = 0; i < 4; ++i) {
    CHECK(std::isfinite(out1.at(i)));
    CHECK(out1.at(i) == out2.at(i));
  }
  // Identical input rows produce identical output rows.
  CHECK(out1.at(0) == out1.at(2));
  CHECK(out1.at(1) == out1.at(3));
}

TEST_CASE("generate rejects off-simplex conditions") {
  RngHub hub(2);
  GeneratorNet g = make_generator(2, 2, 8, 2, hub.stream("init/g"));
  Tensor z = Tensor::zeros({1, 2});
  CHECK_THROWS_AS(generate(g, z, Tensor::from({1, 2}, {0.7, 0.4})),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate(g, z, Tensor::from({1, 2}, {1.2, -0.2})),
                  std::invalid_argument);
  // A 1e-7 perturbation stays within tolerance.
  CHECK_NOTHROW(generate(g, z, Tensor::from({1, 2}, {0.5 + 5e-8, 0.5 - 4e-8})));
}

TEST_CASE("classifier rows are posteriors; eval mode is deterministic") {
  RngHub hub(3);
  DropoutSpec drop{true, {0.2, 0.5, 0.5}};
  DiscClassifierNet dc = make_disc_classifier(2, 5, 32, 3, drop, hub.stream("init"));
  Tensor x = Tensor::from({4, 2}, {0.1, 0.2, -1.0, 0.5, 2.0, -2.0, 0.0, 0.0});

  Tensor s1 = classify(dc, x, false, hub.stream("drop"));
  Tensor s2 = classify(dc, x, false, hub.stream("drop"));
  for (Index i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (Index j = 0; j < 5; ++j) sum += s1.at(i * 5 + j);
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
  for (Index i = 0; i < s1.size(); ++i) CHECK(s1.at(i) == s2.at(i));

  // Train mode draws fresh dropout masks, so outputs differ between calls.
  Tensor t1 = classify(dc, x, true, hub.stream("drop"));
  Tensor t2 = classify(dc, x, true, hub.stream("drop"));
  int diffs = 0;
  for (Index i = 0; i < t1.size(); ++i) {
    if (t1.at(i) != t2.at(i)) ++diffs;
  }
  CHECK(diffs > 0);
}

TEST_CASE("trunk weights are tied between heads; heads stay independent") {
  RngHub hub(4);
  DropoutSpec drop{false, {0, 0, 0}};
  DiscClassifierNet dc = make_disc_classifier(2, 2, 16, 3, drop, hub.stream("init"));
  Tensor x = Tensor::from({1, 2}, {0.4, -0.9});

  Tensor d0 = discriminate(dc, x, false, hub.stream("d"));
  Tensor c0 = classify_logits(dc, x, false, hub.stream("d"));

  dc.shared[0].w.mutable_values()[0] += 0.5;
  Tensor d1 = discriminate(dc, x, false, hub.stream("d"));
  Tensor c1 = classify_logits(dc, x, false, hub.stream("d"));
  CHECK(d1.at(0) != d0.at(0));
  CHECK(c1.at(0) != c0.at(0));

  // The D head alone must not move the classifier.
  dc.d_head.w.mutable_values()[0] += 0.5;
  Tensor d2 = discriminate(dc, x, false, hub.stream("d"));
  Tensor c2 = classify_logits(dc, x, false, hub.stream("d"));
  CHECK(d2.at(0) != d1.at(0));
  CHECK(c2.at(0) == c1.at(0));
  CHECK(c2.at(1) == c1.at(1));
}

TEST_CASE("k_shared controls tail duplication") {
  RngHub hub(5);
  DropoutSpec drop{false, {0, 0, 0}};
  DiscClassifierNet full = make_disc_classifier(2, 2, 8, 3, drop, hub.stream("a"));
  CHECK(full.shared.size() == 3);
  CHECK(full.d_tail.empty());
  CHECK(full.c_tail.empty());

  DiscClassifierNet split = make_disc_classifier(2, 2, 8, 1, drop, hub.stream("b"));
  CHECK(split.shared.size() == 1);
  CHECK(split.d_tail.size() == 2);
  CHECK(split.c_tail.size() == 2);

  CHECK_THROWS_AS(make_disc_classifier(2, 2, 8, 4, drop, hub.stream("c")),
                  std::invalid_argument);
}

TEST_CASE("ac-gan and cp-gan nets share identical shapes") {
  RngHub hub_a(6), hub_b(6);
  GeneratorNet ga = make_generator(2, 5, 64, 2, hub_a.stream("init/g"));
  GeneratorNet gb = make_generator(2, 5, 64, 2, hub_b.stream("init/g"));
  auto pa = named_params(ga);
  auto pb = named_params(gb);
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].tensor.shape() == pb[i].tensor.shape());
  }
}

TEST_CASE("pgan outputs live on the simplex for any weights") {
  RngHub hub(7);
  PGanNets nets = make_pgan(3, 16, hub.stream("init/pgan"));
  PganSample sample = pgan_sample(nets, 64, hub.stream("z"), hub.stream("y"));
  CHECK(sample.s.shape() == Shape{64, 3});
  for (Index i = 0; i < 64; ++i) {
    double sum = 0.0;
    for (Index j = 0; j < 3; ++j) {
      CHECK(sample.s.at(i * 3 + j) >= 0.0);
      sum += sample.s.at(i * 3 + j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
    double ysum = 0.0;
    for (Index j = 0; j < 3; ++j) ysum += sample.y.at(i * 3 + j);
    CHECK(ysum == 1.0);
  }
  Tensor score = pgan_critic(nets, sample.s, sample.y);
  CHECK(score.shape() == Shape{64, 1});
}

TEST_CASE("bundle clone detaches parameter storage") {
  RngHub hub(8);
  ModelBundle b;
  b.variant = Variant::kCpGan;
  b.g = make_generator(2, 2, 8, 2, hub.stream("g"));
  DropoutSpec drop{false, {0, 0, 0}};
  b.dc = make_disc_classifier(2, 2, 8, 3, drop, hub.stream("dc"));
  ModelBundle copy = clone(b);
  copy.g.hidden[0].w.mutable_values()[0] += 1.0;
  CHECK(b.g.hidden[0].w.at(0) != copy.g.hidden[0].w.at(0));
  auto pa = named_params(b);
  auto pb = named_params(copy);
  REQUIRE(pa.size() == pb.size());
}
