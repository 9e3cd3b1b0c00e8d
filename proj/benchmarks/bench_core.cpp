#include <benchmark/benchmark.h>

#include "overlapgan/losses.hpp"
#include "overlapgan/nets.hpp"
#include "overlapgan/rng.hpp"
#include "overlapgan/tensor.hpp"

namespace {

using namespace ogan;

Tensor random_matrix(Index n, Index m, RngStream& rng, bool requires_grad = false) {
  std::vector<double> v(static_cast<size_t>(n * m));
  for (double& e : v) e = rng.normal();
  return Tensor::from({n, m}, std::move(v), requires_grad);
}

void BM_MatmulForward(benchmark::State& state) {
  const Index n = state.range(0), k = state.range(1);
  RngStream rng(1, "bench");
  Tensor a = random_matrix(n, k, rng);
  Tensor b = random_matrix(k, k, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * n * k * k);
}
BENCHMARK(BM_MatmulForward)->Args({256, 64})->Args({256, 128})->Args({256, 512});

void BM_MlpBackward(benchmark::State& state) {
  const Index width = state.range(0);
  RngHub hub(3);
  DropoutSpec drop{false, {0, 0, 0}};
  DiscClassifierNet dc = make_disc_classifier(2, 2, width, 3, drop,
                                              hub.stream("init"));
  RngStream rng(2, "bench");
  Tensor x = random_matrix(256, 2, rng);
  for (auto _ : state) {
    for (auto& p : named_params(dc)) p.tensor.zero_grad();
    Tensor score = discriminate(dc, x, false, rng);
    backward(mean_all(score));
  }
}
BENCHMARK(BM_MlpBackward)->Arg(64)->Arg(512);

void BM_GradientPenalty(benchmark::State& state) {
  const Index width = state.range(0);
  RngHub hub(4);
  DropoutSpec drop{false, {0, 0, 0}};
  DiscClassifierNet dc = make_disc_classifier(2, 2, width, 3, drop,
                                              hub.stream("init"));
  RngStream rng(5, "bench");
  Tensor xr = random_matrix(256, 2, rng);
  Tensor xf = random_matrix(256, 2, rng);
  CriticFn critic = [&](const Tensor& x) {
    return discriminate(dc, x, false, rng);
  };
  for (auto _ : state) {
    for (auto& p : named_params(dc)) p.tensor.zero_grad();
    Tensor gp = gradient_penalty(critic, xr, xf, rng);
    backward(gp);
  }
}
BENCHMARK(BM_GradientPenalty)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
