#include <cmath>

#include "clfp/ops.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace clfp;

TEST_CASE("shape basics") {
  Shape s{2, 3, 4};
  CHECK(s.rank() == 3);
  CHECK(s.elements() == 24);
  CHECK(s.with(1, 5) == Shape{2, 5, 4});
  CHECK(s.str() == "[2,3,4]");
  CHECK(Shape{}.elements() == 0);
  CHECK_THROWS_AS(Shape({2, 0}), ShapeError);
}

TEST_CASE("tensor construction and indexing") {
  Tensor t(Shape{2, 3}, 1.5f);
  CHECK(t.size() == 6);
  t(1, 2) = 7;
  CHECK(t[5] == 7);
  CHECK_THROWS_AS(t(2, 0), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  CHECK(t.reshaped(Shape{3, 2}).shape() == Shape{3, 2});
  CHECK_THROWS_AS(t.reshaped(Shape{4, 2}), ShapeError);
  const Tensor64 d = t.cast<double>();
  CHECK(d(1, 2) == 7.0);
}

TEST_CASE("matmul against the triple loop") {
  const Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(matmul(eye, m) == m);

  const Tensor r = matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}}));
  CHECK(r.shape() == Shape{1, 1});
  CHECK(r[0] == 11);

  SplitMix64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t a = 1 + rng.below(9), b = 1 + rng.below(9), c = 1 + rng.below(9);
    const auto x = oracle::random_tensor<double>(Shape{a, b}, rng);
    const auto y = oracle::random_tensor<double>(Shape{b, c}, rng);
    CHECK(oracle::max_abs_diff(matmul(x, y), oracle::matmul(x, y)) < 1e-12);
  }
  CHECK_THROWS_AS(matmul(Tensor(Shape{2, 3}), Tensor(Shape{4, 2})), ShapeError);
}

TEST_CASE("conv2d small cases") {
  const Tensor ones3(Shape{3, 3, 1}, 1.0f);
  const Tensor out = conv2d(ones3, Tensor(Shape{2, 2, 1, 1}, 1.0f), Tensor(Shape{1}), Padding::valid);
  CHECK(out.shape() == Shape{2, 2, 1});
  for (float v : out.values()) CHECK(v == 4.0f);

  CHECK_THROWS_AS(conv2d(Tensor(Shape{2, 2, 1}), Tensor(Shape{3, 3, 1, 1}), Tensor(Shape{1}), Padding::valid),
                  ShapeError);
}

TEST_CASE("conv2d with a unit 1x1 kernel is the identity") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t h = 1 + rng.below(8), w = 1 + rng.below(8), c = 1 + rng.below(3);
    const auto x = oracle::random_tensor<float>(Shape{h, w, c}, rng);
    Tensor k(Shape{1, 1, c, c});
    for (std::size_t i = 0; i < c; ++i) k(0, 0, i, i) = 1;
    for (Padding p : {Padding::valid, Padding::same}) {
      CHECK(conv2d(x, k, Tensor(Shape{c}), p) == x);
    }
  }
}

TEST_CASE("conv2d matches the naive five-loop reference") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t h = 1 + rng.below(8), w = 1 + rng.below(8), ci = 1 + rng.below(3);
    const std::size_t co = 1 + rng.below(3);
    const bool same = rng.below(2) == 1;
    // Even kernels too, to exercise the bottom/right padding rule.
    const std::size_t kh = 1 + rng.below(same ? 4 : h), kw = 1 + rng.below(same ? 4 : w);
    const auto x = oracle::random_tensor<float>(Shape{h, w, ci}, rng);
    const auto k = oracle::random_tensor<float>(Shape{kh, kw, ci, co}, rng);
    const auto b = oracle::random_tensor<float>(Shape{co}, rng);
    const Tensor got = conv2d(x, k, b, same ? Padding::same : Padding::valid);
    const Tensor want = oracle::conv2d(x, k, b, same);
    REQUIRE(got.shape() == want.shape());
    CHECK(oracle::max_abs_diff(got, want) < 1e-5);
  }
}

TEST_CASE("conv2d backward against finite differences") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t h = 2 + rng.below(4), w = 2 + rng.below(4), ci = 1 + rng.below(2), co = 1 + rng.below(2);
    const bool same = trial % 2 == 0;
    const std::size_t kh = same ? 3 : 2, kw = same ? 1 + 2 * rng.below(2) : 2;
    auto x = oracle::random_tensor<double>(Shape{h, w, ci}, rng);
    auto k = oracle::random_tensor<double>(Shape{kh, kw, ci, co}, rng);
    auto b = oracle::random_tensor<double>(Shape{co}, rng);
    const Padding p = same ? Padding::same : Padding::valid;
    const auto proj = oracle::random_tensor<double>(conv2d(x, k, b, p).shape(), rng);
    auto loss = [&] { return oracle::dot(conv2d(x, k, b, p), proj); };

    const auto g = conv2d_backward(x, k, proj, p);
    CHECK(oracle::max_rel_error(g.input, oracle::numeric_grad<double>(loss, x)) < 1e-6);
    CHECK(oracle::max_rel_error(g.kernels, oracle::numeric_grad<double>(loss, k)) < 1e-6);
    CHECK(oracle::max_rel_error(g.bias, oracle::numeric_grad<double>(loss, b)) < 1e-6);
  }
}

TEST_CASE("maxpool2d forward and backward") {
  const Tensor x(Shape{2, 2, 1}, std::vector<float>{1, 2, 3, 4});
  const auto p = maxpool2d(x, 2, 2);
  CHECK(p.output.shape() == Shape{1, 1, 1});
  CHECK(p.output[0] == 4);

  const Tensor c(Shape{4, 6, 2}, 2.5f);
  const auto pc = maxpool2d(c, 2, 3);
  CHECK(pc.output.shape() == Shape{2, 2, 2});
  for (float v : pc.output.values()) CHECK(v == 2.5f);
  // Ties route to the first element of the window in row-major order.
  const Tensor g = maxpool2d_backward(pc, Tensor(pc.output.shape(), 1.0f));
  CHECK(g(0, 0, 0) == 1.0f);
  CHECK(g(0, 1, 0) == 0.0f);

  CHECK_THROWS_AS(maxpool2d(Tensor(Shape{3, 3, 1}), 2, 2), ShapeError);
}

TEST_CASE("maxpool2d backward puts exactly one nonzero per window") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t ph = 1 + rng.below(3), pw = 1 + rng.below(3);
    const std::size_t h = ph * (1 + rng.below(3)), w = pw * (1 + rng.below(3)), c = 1 + rng.below(2);
    const auto x = oracle::random_tensor<float>(Shape{h, w, c}, rng);
    const auto p = maxpool2d(x, ph, pw);
    const Tensor g = maxpool2d_backward(p, Tensor(p.output.shape(), 1.0f));
    for (std::size_t oy = 0; oy < h / ph; ++oy)
      for (std::size_t ox = 0; ox < w / pw; ++ox)
        for (std::size_t ch = 0; ch < c; ++ch) {
          int nonzero = 0;
          float best = -2;
          for (std::size_t dy = 0; dy < ph; ++dy)
            for (std::size_t dx = 0; dx < pw; ++dx) {
              nonzero += g(oy * ph + dy, ox * pw + dx, ch) != 0.0f;
              best = std::max(best, x(oy * ph + dy, ox * pw + dx, ch));
            }
          CHECK(nonzero == 1);
          CHECK(p.output(oy, ox, ch) == best);
        }
  }
}

TEST_CASE("activation closed forms") {
  const Tensor64 z = Tensor64::vector({0.0});
  CHECK(activate(Activation::sigmoid, z)[0] == 0.5);
  CHECK(activate(Activation::tanh, z)[0] == 0.0);
  CHECK(activate(Activation::relu, Tensor64::vector({-3.0}))[0] == 0.0);
  CHECK(derivative(Activation::relu, z)[0] == 0.0);

  const auto s = activate(Activation::softmax, Tensor64::vector({0.0, 0.0}));
  CHECK(s[0] == 0.5);
  CHECK(s[1] == 0.5);
  const auto t = activate(Activation::softmax, Tensor64::vector({std::log(2.0), 0.0}));
  CHECK(t[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(t[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(activate(Activation::softmax, Tensor64(Shape{2, 2, 2})), ShapeError);
  // Large logits stay finite.
  const auto big = activate(Activation::softmax, Tensor64::vector({1000.0, 0.0}));
  CHECK(big[0] == 1.0);
  CHECK(all_finite(big));
}

TEST_CASE("softmax is a probability vector and shift invariant") {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rows = 1 + rng.below(3), n = 2 + rng.below(8);
    auto x = oracle::random_tensor<double>(Shape{rows, n}, rng, -20, 20);
    const auto p = activate(Activation::softmax, x);
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0;
      std::size_t best = 0;
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(p(r, j) >= 0.0);
        CHECK(p(r, j) <= 1.0);
        sum += p(r, j);
        if (p(r, j) > p(r, best)) best = j;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-6);
      const double shift = rng.uniform(-50, 50);
      Tensor64 shifted = x;
      for (std::size_t j = 0; j < n; ++j) shifted(r, j) += shift;
      const auto q = activate(Activation::softmax, shifted);
      std::size_t best_q = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (q(r, j) > q(r, best_q)) best_q = j;
      CHECK(best == best_q);
    }
  }
}

TEST_CASE("elementwise derivatives match central differences") {
  SplitMix64 rng(17);
  for (Activation kind : {Activation::sigmoid, Activation::tanh, Activation::relu}) {
    for (int i = 0; i < 100; ++i) {
      double x = rng.uniform(-4, 4);
      if (std::abs(x) <= 1e-3) x = 0.5;
      const double h = 1e-4;
      const double num = (activate(kind, Tensor64::vector({x + h}))[0] -
                          activate(kind, Tensor64::vector({x - h}))[0]) / (2 * h);
      const double ana = derivative(kind, Tensor64::vector({x}))[0];
      CHECK(oracle::rel_error(ana, num) <= 1e-6);
    }
  }
}

TEST_CASE("softmax backward matches finite differences") {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = oracle::random_tensor<double>(Shape{2 + rng.below(5)}, rng, -3, 3);
    const auto proj = oracle::random_tensor<double>(x.shape(), rng);
    auto loss = [&] { return oracle::dot(activate(Activation::softmax, x), proj); };
    const auto g = activation_backward(Activation::softmax, x, proj);
    CHECK(oracle::max_rel_error(g, oracle::numeric_grad<double>(loss, x)) < 1e-6);
  }
}

TEST_CASE("concat and split") {
  const Tensor a = Tensor::vector({1, 2});
  const Tensor joined = concat(a, Tensor::vector({3}), 0);
  CHECK(joined == Tensor::vector({1, 2, 3}));
  CHECK(concat(a, Tensor(), 0) == a);
  CHECK(concat(Tensor(), a, 0) == a);
  CHECK_THROWS_AS(concat(Tensor(Shape{2, 3}), Tensor(Shape{3, 3}), 1), ShapeError);

  SplitMix64 rng(1);
  const auto x = oracle::random_tensor<float>(Shape{3, 4, 2}, rng);
  const auto y = oracle::random_tensor<float>(Shape{3, 4, 5}, rng);
  const Tensor xy = concat(x, y, 2);
  CHECK(xy.shape() == Shape{3, 4, 7});
  CHECK(xy(1, 2, 1) == x(1, 2, 1));
  CHECK(xy(1, 2, 4) == y(1, 2, 2));
  const auto [l, r] = split(xy, 2, 2);
  CHECK(l == x);
  CHECK(r == y);
}
