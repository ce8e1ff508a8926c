#include <benchmark/benchmark.h>

#include "clfp/model.hpp"
#include "clfp/ops.hpp"
#include "clfp/recurrent.hpp"
#include "clfp/rng.hpp"

using namespace clfp;

namespace {

Tensor random(const Shape& shape, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  return t;
}

// The two model scales that matter: acceptance runs (4x32 frames) and the
// full 96x96 input (12x96 frames).
ModelConfig scaled(std::int64_t frame_height, std::int64_t frame_width) {
  ModelConfig c;
  c.frame_height = static_cast<std::size_t>(frame_height);
  c.frame_width = static_cast<std::size_t>(frame_width);
  c.num_classes = 20;
  return c;
}

}  // namespace

static void BM_Conv2d(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0)), w = static_cast<std::size_t>(state.range(1));
  const Tensor input = random(Shape{h, w, 65}, 1);
  const Tensor kernels = random(Shape{3, 3, 65, 64}, 2);
  const Tensor bias = random(Shape{64}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(input, kernels, bias, Padding::same));
}
BENCHMARK(BM_Conv2d)->Args({4, 32})->Args({12, 96})->Unit(benchmark::kMicrosecond);

static void BM_ConvLstmStep(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0)), w = static_cast<std::size_t>(state.range(1));
  auto params = ConvLstmParams<float>::zeros(64, 1, 3, 3);
  std::uint64_t seed = 10;
  for (auto& [name, t] : params.tensors()) *t = random(t->shape(), seed++);
  const auto prev = zero_state(params, h, w);
  const Tensor x = random(Shape{h, w, 1}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(convlstm_step(params, prev, x));
}
BENCHMARK(BM_ConvLstmStep)->Args({4, 32})->Args({12, 96})->Unit(benchmark::kMicrosecond);

static void BM_ModelForward(benchmark::State& state) {
  const ModelConfig c = scaled(state.range(0), state.range(1));
  const auto m = build_model<float>(c);
  const Tensor x = random(c.input_shape(), 5);
  for (auto _ : state) benchmark::DoNotOptimize(model_forward(m, x, Mode::eval));
}
BENCHMARK(BM_ModelForward)->Args({4, 32})->Args({12, 96})->Unit(benchmark::kMillisecond);

static void BM_ModelForwardBackward(benchmark::State& state) {
  const ModelConfig c = scaled(state.range(0), state.range(1));
  const auto m = build_model<float>(c);
  const Tensor x = random(c.input_shape(), 6);
  Tensor grad_logits(Shape{c.num_classes});
  grad_logits[0] = -1.0f;
  for (auto _ : state) {
    const auto fwd = model_forward(m, x, Mode::eval);
    benchmark::DoNotOptimize(model_backward(m, fwd.cache, grad_logits));
  }
}
BENCHMARK(BM_ModelForwardBackward)->Args({4, 32})->Args({12, 96})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
