#include <benchmark/benchmark.h>

#include "blindlab/gradient.hpp"
#include "blindlab/rng.hpp"
#include "blindlab/trainer.hpp"

namespace {

using namespace blindlab;

Tensor4 random_images(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor4 t(Shape{n, 1, 28, 28});
  for (double& v : t.data()) v = rng.uniform01();
  return t;
}

std::vector<int> random_labels(std::size_t n) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 10);
  return labels;
}

ConvMode mode_arg(const benchmark::State& state) {
  return state.range(0) == 0 ? ConvMode::ChannelSum : ConvMode::Standard;
}

void BM_Conv2d(benchmark::State& state) {
  const ConvMode mode = mode_arg(state);
  RngStream rng(1);
  Tensor4 input(Shape{16, 16, 12, 12});
  for (double& v : input.data()) v = rng.uniform01();
  KernelBank bank = mode == ConvMode::ChannelSum ? KernelBank::channel_sum(16, 5, 5)
                                                 : KernelBank::standard(16, 16, 5, 5);
  for (double& w : bank.weights()) w = rng.uniform(-1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(input, bank));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_Conv2d)->Arg(0)->Arg(1);

void BM_Forward(benchmark::State& state) {
  const NetworkModel model = init_weights(build_cnn(kMnistGeometry, 10, mode_arg(state)), 2);
  const Tensor4 batch = random_images(static_cast<std::size_t>(state.range(1)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, batch));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Forward)->Args({0, 16})->Args({1, 16})->Args({1, 256});

void BM_Backward(benchmark::State& state) {
  const NetworkModel model = init_weights(build_cnn(kMnistGeometry, 10, mode_arg(state)), 4);
  const std::size_t n = static_cast<std::size_t>(state.range(1));
  const Tensor4 batch = random_images(n, 5);
  const std::vector<int> labels = random_labels(n);
  for (auto _ : state) {
    const ForwardPass pass = forward_with_cache(model, batch, labels);
    benchmark::DoNotOptimize(backward(model, pass.cache, labels));
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Backward)->Args({0, 16})->Args({1, 16})->Args({1, 256});

void BM_BlindDescentStep(benchmark::State& state) {
  NetworkModel model = init_weights(build_cnn(kMnistGeometry, 10, mode_arg(state)), 6);
  const Tensor4 batch = random_images(16, 7);
  const std::vector<int> labels = random_labels(16);
  RngStream rng(8);
  const ProposalSpec spec{ProposalKind::UniformAdditive, 0.001};
  std::size_t index = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        blind_descent_step(model, batch, labels, spec, FreezePolicy{}, index++, rng));
}
BENCHMARK(BM_BlindDescentStep)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
