#include <doctest.h>

#include <cmath>

#include "overlapgan/rng.hpp"
#include "overlapgan/tensor.hpp"

using namespace ogan;

namespace {

Tensor row(std::vector<double> v) {
  const Index n = static_cast<Index>(v.size());
  return Tensor::from({1, n}, std::move(v));
}

}  // namespace

TEST_CASE("softmax of a constant row is uniform") {
  Tensor s = softmax_rows(row({0.0, 0.0, 0.0}));
  for (int j = 0; j < 3; ++j) CHECK(s.at(j) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and stay positive") {
  RngStream rng(5, "x");
  std::vector<double> v(40);
  for (double& e : v) e = rng.uniform_range(-50.0, 50.0);
  Tensor s = softmax_rows(Tensor::from({8, 5}, std::move(v)));
  for (Index i = 0; i < 8; ++i) {
    double sum = 0.0;
    for (Index j = 0; j < 5; ++j) {
      CHECK(s.at(i * 5 + j) > 0.0);
      sum += s.at(i * 5 + j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("relu clamps negatives") {
  Tensor r = relu(row({-1.0, 0.0, 2.0}));
  CHECK(r.at(0) == 0.0);
  CHECK(r.at(1) == 0.0);
  CHECK(r.at(2) == 2.0);
}

TEST_CASE("matmul of ones") {
  Tensor a = Tensor::full({2, 3}, 1.0);
  Tensor b = Tensor::full({3, 2}, 1.0);
  Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 2});
  for (Index i = 0; i < 4; ++i) CHECK(c.at(i) == 3.0);
}

TEST_CASE("matmul reports both shapes on mismatch") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       "matmul: inner dimensions differ: [2, 3] x [4, 2]",
                       ShapeError);
}

TEST_CASE("add broadcasts a row bias") {
  Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = row({10, 20});
  Tensor y = add(x, b);
  CHECK(y.at(0) == 11);
  CHECK(y.at(1) == 22);
  CHECK(y.at(2) == 13);
  CHECK(y.at(3) == 24);
  CHECK_THROWS_AS(add(x, Tensor::zeros({1, 3})), ShapeError);
}

TEST_CASE("concat and slice are inverse") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({2, 3}, {5, 6, 7, 8, 9, 10});
  const Tensor parts[] = {a, b};
  Tensor c = concat(parts, 1);
  CHECK(c.shape() == Shape{2, 5});
  Tensor back = slice(c, 1, 2, 3);
  for (Index i = 0; i < 6; ++i) CHECK(back.at(i) == b.at(i));
  CHECK_THROWS_AS(concat(std::span<const Tensor>{}, 1), ShapeError);
}

TEST_CASE("concat rejects mismatched non-axis dims") {
  Tensor a = Tensor::zeros({2, 2});
  Tensor b = Tensor::zeros({3, 2});
  const Tensor parts[] = {a, b};
  CHECK_THROWS_AS(concat(parts, 1), ShapeError);
}

TEST_CASE("dropout validates the rate") {
  RngStream rng(1, "drop");
  Tensor x = Tensor::full({2, 2}, 1.0);
  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), std::invalid_argument);
  CHECK_THROWS_AS(dropout(x, -0.1, true, rng), std::invalid_argument);
}

TEST_CASE("dropout eval mode is the identity") {
  RngStream rng(1, "drop");
  Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor y = dropout(x, 0.5, /*train_mode=*/false, rng);
  CHECK(y.node() == x.node());
}

TEST_CASE("dropout train mode drops close to the requested fraction") {
  RngStream rng(11, "drop");
  const Index n = 100000;
  const double rate = 0.3;
  Tensor x = Tensor::full({n, 1}, 1.0);
  Tensor y = dropout(x, rate, true, rng);
  Index zeros = 0;
  for (Index i = 0; i < n; ++i) {
    const double v = y.at(i);
    if (v == 0.0) {
      ++zeros;
    } else {
      CHECK(v == doctest::Approx(1.0 / (1.0 - rate)).epsilon(1e-12));
    }
  }
  const double p = static_cast<double>(zeros) / n;
  const double sigma = std::sqrt(rate * (1.0 - rate) / n);
  CHECK(std::abs(p - rate) < 3.0 * sigma);
}

TEST_CASE("scalar affine and reductions") {
  Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor y = affine(x, 2.0, 1.0);
  CHECK(y.at(3) == 9.0);
  CHECK(sum_all(x).item() == 10.0);
  CHECK(mean_all(x).item() == 2.5);
  Tensor rows = sum_axis(x, 1);
  CHECK(rows.shape() == Shape{2, 1});
  CHECK(rows.at(0) == 3.0);
  CHECK(rows.at(1) == 7.0);
  Tensor cols = sum_axis(x, 0);
  CHECK(cols.shape() == Shape{1, 2});
  CHECK(cols.at(0) == 4.0);
  CHECK(cols.at(1) == 6.0);
}

TEST_CASE("transpose") {
  Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = transpose(x);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.at(0) == 1);
  CHECK(t.at(1) == 4);
  CHECK(t.at(5) == 6);
}

TEST_CASE("log_softmax equals log of softmax") {
  Tensor x = Tensor::from({2, 3}, {0.3, -1.0, 2.0, 5.0, 5.0, 5.0});
  Tensor ls = log_softmax_rows(x);
  Tensor s = softmax_rows(x);
  for (Index i = 0; i < 6; ++i) {
    CHECK(ls.at(i) == doctest::Approx(std::log(s.at(i))).epsilon(1e-12));
  }
}

TEST_CASE("detach cuts tracking") {
  Tensor x = Tensor::from({1, 2}, {1.0, 2.0}, /*requires_grad=*/true);
  Tensor d = x.detach();
  CHECK(x.requires_grad());
  CHECK(!d.requires_grad());
  CHECK(d.at(1) == 2.0);
}
