#include <cmath>

#include "clfp/recurrent.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace clfp;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar cell written straight from the gate equations.
struct ScalarCell {
  double wf[2], wi[2], wc[2], wo[2];  // {weight on h, weight on x}
  double bf, bi, bc, bo;

  std::pair<double, double> step(double h, double c, double x) const {
    const double f = sig(wf[0] * h + wf[1] * x + bf);
    const double i = sig(wi[0] * h + wi[1] * x + bi);
    const double g = std::tanh(wc[0] * h + wc[1] * x + bc);
    const double o = sig(wo[0] * h + wo[1] * x + bo);
    const double c_new = f * c + i * g;
    return {o * std::tanh(c_new), c_new};
  }
};

LstmParams<double> to_params(const ScalarCell& s) {
  auto p = LstmParams<double>::zeros(1, 1);
  p.W_f = Tensor64::matrix({{s.wf[0], s.wf[1]}});
  p.W_i = Tensor64::matrix({{s.wi[0], s.wi[1]}});
  p.W_c = Tensor64::matrix({{s.wc[0], s.wc[1]}});
  p.W_o = Tensor64::matrix({{s.wo[0], s.wo[1]}});
  p.b_f = Tensor64::vector({s.bf});
  p.b_i = Tensor64::vector({s.bi});
  p.b_c = Tensor64::vector({s.bc});
  p.b_o = Tensor64::vector({s.bo});
  return p;
}

template <typename Params>
void randomize(Params& p, SplitMix64& rng, double scale) {
  for (auto& [name, t] : p.tensors())
    for (auto& v : t->values()) v = static_cast<std::remove_reference_t<decltype(v)>>(rng.uniform(-scale, scale));
}

}  // namespace

TEST_CASE("zero-weight lstm step") {
  const auto p = LstmParams<double>::zeros(3, 2);
  LstmState<double> prev = zero_state(p);
  const auto r = lstm_step(p, prev, Tensor64::vector({0.7, -1.2}));
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(r.gates.forget[k] == 0.5);
    CHECK(r.gates.input[k] == 0.5);
    CHECK(r.gates.output[k] == 0.5);
    CHECK(r.gates.candidate[k] == 0.0);
    CHECK(r.state.c[k] == 0.0);
    CHECK(r.state.h[k] == 0.0);
  }

  prev.c = Tensor64::vector({2.0, 2.0, 2.0});
  const auto r2 = lstm_step(p, prev, Tensor64::vector({0.0, 0.0}));
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(r2.state.c[k] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(r2.state.h[k] - 0.5 * std::tanh(1.0)) <= 1e-6);
    CHECK(std::abs(r2.state.h[k] - 0.38079707797788) <= 1e-6);
  }
}

TEST_CASE("hand-evaluated unit-weight lstm step") {
  auto p = LstmParams<double>::zeros(1, 1);
  for (auto* w : {&p.W_f, &p.W_i, &p.W_c, &p.W_o}) w->fill(1.0);
  const auto r = lstm_step(p, zero_state(p), Tensor64::vector({1.0}));
  const double s1 = 1.0 / (1.0 + std::exp(-1.0));
  const double c = s1 * std::tanh(1.0);
  CHECK(std::abs(r.gates.forget[0] - s1) <= 1e-6);
  CHECK(std::abs(r.gates.input[0] - s1) <= 1e-6);
  CHECK(std::abs(r.gates.output[0] - s1) <= 1e-6);
  CHECK(std::abs(r.gates.candidate[0] - std::tanh(1.0)) <= 1e-6);
  CHECK(std::abs(r.state.c[0] - c) <= 1e-6);
  CHECK(std::abs(r.state.h[0] - s1 * std::tanh(c)) <= 1e-6);

  // Same case in 32-bit.
  auto pf = LstmParams<float>::zeros(1, 1);
  for (auto* w : {&pf.W_f, &pf.W_i, &pf.W_c, &pf.W_o}) w->fill(1.0f);
  const auto rf = lstm_step(pf, zero_state(pf), Tensor::vector({1.0f}));
  CHECK(std::abs(rf.state.h[0] - s1 * std::tanh(c)) <= 1e-6);
}

TEST_CASE("lstm step rejects mismatched shapes") {
  const auto p = LstmParams<double>::zeros(2, 3);
  CHECK_THROWS_AS(lstm_step(p, zero_state(p), Tensor64::vector({1.0, 2.0})), ShapeError);
  LstmState<double> bad{Tensor64::vector({0.0}), Tensor64::vector({0.0})};
  CHECK_THROWS_AS(lstm_step(p, bad, Tensor64::vector({1.0, 2.0, 3.0})), ShapeError);
}

TEST_CASE("zero-weight convlstm step") {
  const auto p = ConvLstmParams<double>::zeros(2, 1, 3, 3);
  auto prev = zero_state(p, 4, 5);
  const auto r = convlstm_step(p, prev, Tensor64(Shape{4, 5, 1}, 0.3));
  for (double v : r.state.h.values()) CHECK(v == 0.0);
  for (double v : r.gates.forget.values()) CHECK(v == 0.5);
  for (double v : r.gates.output.values()) CHECK(v == 0.5);

  prev.c.fill(2.0);
  const auto r2 = convlstm_step(p, prev, Tensor64(Shape{4, 5, 1}, -0.8));
  for (double v : r2.state.h.values()) CHECK(std::abs(v - 0.5 * std::tanh(1.0)) <= 1e-6);

  CHECK_THROWS_AS(convlstm_step(p, prev, Tensor64(Shape{3, 5, 1})), ShapeError);
}

TEST_CASE("1x1 convlstm on a 1x1 frame equals the dense cell") {
  SplitMix64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t hidden = 1 + rng.below(4), input = 1 + rng.below(3);
    auto dense = LstmParams<float>::zeros(hidden, input);
    randomize(dense, rng, 1.5);
    auto conv = ConvLstmParams<float>::zeros(hidden, input, 1, 1);
    const std::pair<Tensor*, Tensor*> blocks[] = {
        {&dense.W_f, &conv.K_f}, {&dense.W_i, &conv.K_i}, {&dense.W_c, &conv.K_c}, {&dense.W_o, &conv.K_o}};
    for (auto [w, k] : blocks)
      for (std::size_t o = 0; o < hidden; ++o)
        for (std::size_t j = 0; j < hidden + input; ++j) (*k)(0, 0, j, o) = (*w)(o, j);
    conv.b_f = dense.b_f;
    conv.b_i = dense.b_i;
    conv.b_c = dense.b_c;
    conv.b_o = dense.b_o;

    LstmState<float> prev{oracle::random_tensor<float>(Shape{hidden}, rng),
                          oracle::random_tensor<float>(Shape{hidden}, rng, -2, 2)};
    const auto x = oracle::random_tensor<float>(Shape{input}, rng);
    const auto d = lstm_step(dense, prev, x);
    const LstmState<float> prev_frame{prev.h.reshaped(Shape{1, 1, hidden}),
                                      prev.c.reshaped(Shape{1, 1, hidden})};
    const auto c = convlstm_step(conv, prev_frame, x.reshaped(Shape{1, 1, input}));
    for (std::size_t k = 0; k < hidden; ++k) {
      CHECK(oracle::rel_error(c.state.h[k], d.state.h[k]) <= 1e-6);
      CHECK(oracle::rel_error(c.state.c[k], d.state.c[k]) <= 1e-6);
    }
  }
}

TEST_CASE("unroll threads the state through every step") {
  SplitMix64 rng(14);
  ScalarCell cell{{0.3, -0.7}, {1.1, 0.4}, {-0.6, 0.9}, {0.2, 0.5}, 0.1, -0.2, 0.3, 0.05};
  const auto p = to_params(cell);
  const Tensor64 x(Shape{2, 1}, std::vector<double>{0.8, -1.3});
  const auto u = unroll_sequence(p, x);
  REQUIRE(u.states.size() == 3);
  REQUIRE(u.caches.size() == 2);
  auto [h1, c1] = cell.step(0, 0, 0.8);
  auto [h2, c2] = cell.step(h1, c1, -1.3);
  CHECK(std::abs(u.states[1].h[0] - h1) <= 1e-12);
  CHECK(std::abs(u.last().h[0] - h2) <= 1e-12);
  CHECK(std::abs(u.last().c[0] - c2) <= 1e-12);

  // T = 1 is a single step.
  const auto one = unroll_sequence(p, Tensor64(Shape{1, 1}, std::vector<double>{0.8}));
  CHECK(one.last().h == lstm_step(p, zero_state(p), Tensor64::vector({0.8})).state.h);

  // Zero parameters keep h at zero whatever the input.
  const auto zero = LstmParams<double>::zeros(2, 3);
  const auto uz = unroll_sequence(zero, oracle::random_tensor<double>(Shape{5, 3}, rng, -5, 5));
  for (const auto& s : uz.states)
    for (double v : s.h.values()) CHECK(v == 0.0);

  CHECK_THROWS_AS(unroll_sequence(p, Tensor64()), ShapeError);
}

TEST_CASE("gate ranges and cell growth bound") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t hidden = 1 + rng.below(4), input = 1 + rng.below(4);
    auto p = LstmParams<double>::zeros(hidden, input);
    randomize(p, rng, 3.0);
    const auto x = oracle::random_tensor<double>(Shape{6, input}, rng, -3, 3);
    const auto u = unroll_sequence(p, x);
    for (std::size_t t = 0; t < u.caches.size(); ++t) {
      const auto& g = u.caches[t];
      for (std::size_t k = 0; k < hidden; ++k) {
        CHECK(g.forget[k] > 0.0);
        CHECK(g.forget[k] < 1.0);
        CHECK(g.input[k] > 0.0);
        CHECK(g.input[k] < 1.0);
        CHECK(g.output[k] > 0.0);
        CHECK(g.output[k] < 1.0);
        CHECK(g.candidate[k] > -1.0);
        CHECK(g.candidate[k] < 1.0);
        CHECK(std::abs(u.states[t + 1].c[k]) <= std::abs(u.states[t].c[k]) + 1.0);
      }
    }
  }
}

TEST_CASE("bptt with zero upstream gradient is zero") {
  SplitMix64 rng(6);
  auto p = LstmParams<double>::zeros(3, 2);
  randomize(p, rng, 1.0);
  const auto x = oracle::random_tensor<double>(Shape{4, 2}, rng);
  const auto g = bptt_backward(p, unroll_sequence(p, x), x, Tensor64(Shape{3}));
  for (const auto& [name, t] : g.params.tensors())
    for (double v : t->values()) CHECK(v == 0.0);
  for (double v : g.x.values()) CHECK(v == 0.0);

  auto u = unroll_sequence(p, x);
  u.caches.pop_back();
  CHECK_THROWS_AS(bptt_backward(p, u, x, Tensor64(Shape{3})), ShapeError);
}

TEST_CASE("dense bptt matches finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (std::size_t T = 1; T <= 3; ++T) {
      SplitMix64 rng(seed * 100 + T);
      const std::size_t hidden = 1 + rng.below(3), input = 1 + rng.below(3);
      auto p = LstmParams<double>::zeros(hidden, input);
      randomize(p, rng, 1.0);
      auto x = oracle::random_tensor<double>(Shape{T, input}, rng);
      const auto proj = oracle::random_tensor<double>(Shape{hidden}, rng);
      auto loss = [&] { return oracle::dot(unroll_sequence(p, x).last().h, proj); };
      const auto g = bptt_backward(p, unroll_sequence(p, x), x, proj);
      auto params = p.tensors();
      const auto grads = g.params.tensors();
      for (std::size_t b = 0; b < params.size(); ++b) {
        INFO("seed " << seed << " T " << T << " block " << params[b].first);
        CHECK(oracle::max_rel_error(*grads[b].second, oracle::numeric_grad<double>(loss, *params[b].second)) <= 1e-5);
      }
      CHECK(oracle::max_rel_error(g.x, oracle::numeric_grad<double>(loss, x)) <= 1e-5);
    }
  }
}

TEST_CASE("scalar bptt at T=1 matches finite differences to 1e-6") {
  SplitMix64 rng(77);
  auto p = LstmParams<double>::zeros(1, 1);
  randomize(p, rng, 1.0);
  auto x = oracle::random_tensor<double>(Shape{1, 1}, rng);
  auto loss = [&] { return unroll_sequence(p, x).last().h[0]; };
  const auto g = bptt_backward(p, unroll_sequence(p, x), x, Tensor64::vector({1.0}));
  auto params = p.tensors();
  const auto grads = g.params.tensors();
  for (std::size_t b = 0; b < params.size(); ++b) {
    CHECK(oracle::max_rel_error(*grads[b].second, oracle::numeric_grad<double>(loss, *params[b].second)) <= 1e-6);
  }
}

TEST_CASE("convolutional bptt matches finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (std::size_t T = 1; T <= 3; ++T) {
      SplitMix64 rng(seed * 1000 + T);
      const std::size_t hidden = 1 + rng.below(2), input = 1 + rng.below(2);
      const std::size_t h = 2 + rng.below(2), w = 2 + rng.below(3);
      auto p = ConvLstmParams<double>::zeros(hidden, input, 3, 3);
      randomize(p, rng, 0.5);
      auto x = oracle::random_tensor<double>(Shape{T, h, w, input}, rng);
      const auto proj = oracle::random_tensor<double>(Shape{h, w, hidden}, rng);
      auto loss = [&] { return oracle::dot(unroll_sequence(p, x).last().h, proj); };
      const auto g = bptt_backward(p, unroll_sequence(p, x), x, proj);
      auto params = p.tensors();
      const auto grads = g.params.tensors();
      for (std::size_t b = 0; b < params.size(); ++b) {
        INFO("seed " << seed << " T " << T << " block " << params[b].first);
        CHECK(oracle::max_rel_error(*grads[b].second, oracle::numeric_grad<double>(loss, *params[b].second)) <= 1e-5);
      }
      CHECK(oracle::max_rel_error(g.x, oracle::numeric_grad<double>(loss, x)) <= 1e-5);
    }
  }
}
