#include "clfp/recurrent.hpp"

#include <algorithm>
#include <cmath>

#include "clfp/ops.hpp"
#include "detail/kernels.hpp"

namespace clfp {

namespace {

template <std::floating_point T>
BasicTensor<T> slice_step(const BasicTensor<T>& x, std::size_t t) {
  const auto ext = x.shape().extents();
  Shape inner(std::vector<std::size_t>(ext.begin() + 1, ext.end()));
  const std::size_t n = inner.elements();
  return BasicTensor<T>(std::move(inner),
                        std::vector<T>(x.data() + t * n, x.data() + (t + 1) * n));
}

template <std::floating_point T>
void write_step(BasicTensor<T>& x, std::size_t t, const BasicTensor<T>& step) {
  std::copy(step.data(), step.data() + step.size(), x.data() + t * step.size());
}

// Shared gate algebra. Pre-activations arrive in the gate tensors and are
// squashed in place; the new cell and hidden states follow.
template <std::floating_point T>
StepResult<T> finish_step(GateActivations<T> gates, const BasicTensor<T>& c_prev) {
  for (T& v : gates.forget.values()) v = sigmoid(v);
  for (T& v : gates.input.values()) v = sigmoid(v);
  for (T& v : gates.candidate.values()) v = std::tanh(v);
  for (T& v : gates.output.values()) v = sigmoid(v);

  LstmState<T> next{BasicTensor<T>(c_prev.shape()), BasicTensor<T>(c_prev.shape())};
  for (std::size_t k = 0; k < c_prev.size(); ++k) {
    const T c = gates.forget[k] * c_prev[k] + gates.input[k] * gates.candidate[k];
    next.c[k] = c;
    next.h[k] = gates.output[k] * std::tanh(c);
  }
  return {std::move(next), std::move(gates)};
}

// dL/dz for each gate's pre-activation. On entry dc holds the cell-state
// gradient from the future; on exit it holds dL/dc_{t-1}.
template <std::floating_point T>
GateActivations<T> gate_backward(const GateActivations<T>& g, const BasicTensor<T>& c_prev,
                                 const BasicTensor<T>& c, const BasicTensor<T>& dh,
                                 BasicTensor<T>& dc) {
  GateActivations<T> dz{BasicTensor<T>(c.shape()), BasicTensor<T>(c.shape()),
                        BasicTensor<T>(c.shape()), BasicTensor<T>(c.shape())};
  for (std::size_t k = 0; k < c.size(); ++k) {
    const T tc = std::tanh(c[k]);
    const T o = g.output[k], f = g.forget[k], i = g.input[k], cand = g.candidate[k];
    const T dck = dc[k] + dh[k] * o * (T{1} - tc * tc);
    dz.output[k] = dh[k] * tc * o * (T{1} - o);
    dz.forget[k] = dck * c_prev[k] * f * (T{1} - f);
    dz.input[k] = dck * cand * i * (T{1} - i);
    dz.candidate[k] = dck * i * (T{1} - cand * cand);
    dc[k] = dck * f;
  }
  return dz;
}

template <std::floating_point T>
void require_shape(const BasicTensor<T>& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected " + expected.str() + ", got " +
                     t.shape().str());
  }
}

template <std::floating_point T>
void check_sequence(const Unrolled<T>& forward, const BasicTensor<T>& x) {
  if (x.rank() == 0) throw ShapeError("bptt_backward: empty input sequence");
  const std::size_t steps = x.extent(0);
  if (forward.caches.size() != steps || forward.states.size() != steps + 1) {
    throw ShapeError("bptt_backward: cache holds " + std::to_string(forward.caches.size()) +
                     " steps and " + std::to_string(forward.states.size()) +
                     " states, sequence has " + std::to_string(steps) + " steps");
  }
}

}  // namespace

template <std::floating_point T>
LstmParams<T> LstmParams<T>::zeros(std::size_t hidden, std::size_t input) {
  const Shape w{hidden, hidden + input};
  const Shape b{hidden};
  return {BasicTensor<T>(w), BasicTensor<T>(w), BasicTensor<T>(w), BasicTensor<T>(w),
          BasicTensor<T>(b), BasicTensor<T>(b), BasicTensor<T>(b), BasicTensor<T>(b)};
}

template <std::floating_point T>
void LstmParams<T>::validate() const {
  if (W_f.rank() != 2 || W_f.extent(1) <= W_f.extent(0)) {
    throw ShapeError("LstmParams: W_f must be [hidden, hidden + input], got " + W_f.shape().str());
  }
  for (const auto* w : {&W_i, &W_c, &W_o}) require_same_shape(w->shape(), W_f.shape(), "LstmParams");
  for (const auto* b : {&b_f, &b_i, &b_c, &b_o}) {
    require_same_shape(b->shape(), Shape{hidden()}, "LstmParams bias");
  }
}

template <std::floating_point T>
ConvLstmParams<T> ConvLstmParams<T>::zeros(std::size_t hidden, std::size_t input,
                                           std::size_t kernel_h, std::size_t kernel_w) {
  const Shape k{kernel_h, kernel_w, hidden + input, hidden};
  const Shape b{hidden};
  return {BasicTensor<T>(k), BasicTensor<T>(k), BasicTensor<T>(k), BasicTensor<T>(k),
          BasicTensor<T>(b), BasicTensor<T>(b), BasicTensor<T>(b), BasicTensor<T>(b)};
}

template <std::floating_point T>
void ConvLstmParams<T>::validate() const {
  if (K_f.rank() != 4 || K_f.extent(2) <= K_f.extent(3)) {
    throw ShapeError("ConvLstmParams: K_f must be [kh, kw, hidden + input, hidden], got " +
                     K_f.shape().str());
  }
  if (K_f.extent(0) % 2 == 0 || K_f.extent(1) % 2 == 0) {
    throw ShapeError("ConvLstmParams: kernel extents must be odd, got " + K_f.shape().str());
  }
  for (const auto* k : {&K_i, &K_c, &K_o}) {
    require_same_shape(k->shape(), K_f.shape(), "ConvLstmParams");
  }
  for (const auto* b : {&b_f, &b_i, &b_c, &b_o}) {
    require_same_shape(b->shape(), Shape{hidden()}, "ConvLstmParams bias");
  }
}

template <std::floating_point T>
LstmState<T> zero_state(const LstmParams<T>& params) {
  return {BasicTensor<T>(Shape{params.hidden()}), BasicTensor<T>(Shape{params.hidden()})};
}

template <std::floating_point T>
LstmState<T> zero_state(const ConvLstmParams<T>& params, std::size_t height, std::size_t width) {
  const Shape s{height, width, params.hidden()};
  return {BasicTensor<T>(s), BasicTensor<T>(s)};
}

template <std::floating_point T>
StepResult<T> lstm_step(const LstmParams<T>& params, const LstmState<T>& prev,
                        const BasicTensor<T>& x_t) {
  params.validate();
  const std::size_t hidden = params.hidden();
  require_shape(x_t, Shape{params.input()}, "lstm_step x_t");
  require_shape(prev.h, Shape{hidden}, "lstm_step h");
  require_shape(prev.c, Shape{hidden}, "lstm_step c");

  const BasicTensor<T> v = concat(prev.h, x_t, 0);
  const std::size_t width = v.size();
  auto affine = [&](const BasicTensor<T>& W, const BasicTensor<T>& b) {
    BasicTensor<T> z = b;
    detail::gemm(detail::Op::none, detail::Op::none, hidden, 1, width, W.data(), v.data(),
                 z.data(), true);
    return z;
  };
  GateActivations<T> pre{affine(params.W_f, params.b_f), affine(params.W_i, params.b_i),
                         affine(params.W_c, params.b_c), affine(params.W_o, params.b_o)};
  return finish_step(std::move(pre), prev.c);
}

template <std::floating_point T>
StepResult<T> convlstm_step(const ConvLstmParams<T>& params, const LstmState<T>& prev,
                            const BasicTensor<T>& x_t) {
  params.validate();
  if (x_t.rank() != 3 || x_t.extent(2) != params.input()) {
    throw ShapeError("convlstm_step: x_t must be [h, w, " + std::to_string(params.input()) +
                     "], got " + x_t.shape().str());
  }
  const std::size_t fh = x_t.extent(0), fw = x_t.extent(1), hidden = params.hidden();
  require_shape(prev.h, Shape{fh, fw, hidden}, "convlstm_step h");
  require_shape(prev.c, Shape{fh, fw, hidden}, "convlstm_step c");

  const BasicTensor<T> v = concat(prev.h, x_t, 2);
  const auto g = detail::make_geometry(fh, fw, v.extent(2), params.kernel_h(), params.kernel_w(),
                                       Padding::same);
  std::vector<T> cols;
  detail::im2col(g, v.data(), cols);
  auto conv = [&](const BasicTensor<T>& K, const BasicTensor<T>& b) {
    BasicTensor<T> z(Shape{fh, fw, hidden});
    for (std::size_t p = 0; p < g.pixels(); ++p) {
      std::copy(b.data(), b.data() + hidden, z.data() + p * hidden);
    }
    detail::gemm(detail::Op::none, detail::Op::none, g.pixels(), hidden, g.patch(), cols.data(),
                 K.data(), z.data(), true);
    return z;
  };
  GateActivations<T> pre{conv(params.K_f, params.b_f), conv(params.K_i, params.b_i),
                         conv(params.K_c, params.b_c), conv(params.K_o, params.b_o)};
  return finish_step(std::move(pre), prev.c);
}

template <std::floating_point T>
Unrolled<T> unroll_sequence(const LstmParams<T>& params, const BasicTensor<T>& x,
                            const std::optional<LstmState<T>>& initial) {
  if (x.rank() != 2) {
    throw ShapeError("unroll_sequence: dense cell expects x [T, input], got " + x.shape().str());
  }
  Unrolled<T> out;
  out.states.reserve(x.extent(0) + 1);
  out.caches.reserve(x.extent(0));
  out.states.push_back(initial ? *initial : zero_state(params));
  for (std::size_t t = 0; t < x.extent(0); ++t) {
    auto step = lstm_step(params, out.states.back(), slice_step(x, t));
    out.states.push_back(std::move(step.state));
    out.caches.push_back(std::move(step.gates));
  }
  return out;
}

template <std::floating_point T>
Unrolled<T> unroll_sequence(const ConvLstmParams<T>& params, const BasicTensor<T>& x,
                            const std::optional<LstmState<T>>& initial) {
  if (x.rank() != 4) {
    throw ShapeError("unroll_sequence: convolutional cell expects x [T, h, w, c], got " +
                     x.shape().str());
  }
  Unrolled<T> out;
  out.states.reserve(x.extent(0) + 1);
  out.caches.reserve(x.extent(0));
  out.states.push_back(initial ? *initial : zero_state(params, x.extent(1), x.extent(2)));
  for (std::size_t t = 0; t < x.extent(0); ++t) {
    auto step = convlstm_step(params, out.states.back(), slice_step(x, t));
    out.states.push_back(std::move(step.state));
    out.caches.push_back(std::move(step.gates));
  }
  return out;
}

template <std::floating_point T>
BpttGrads<LstmParams<T>, T> bptt_backward(const LstmParams<T>& params, const Unrolled<T>& forward,
                                          const BasicTensor<T>& x,
                                          const BasicTensor<T>& grad_h_last) {
  check_sequence(forward, x);
  const std::size_t hidden = params.hidden(), input = params.input();
  require_shape(grad_h_last, Shape{hidden}, "bptt_backward grad_h");

  BpttGrads<LstmParams<T>, T> grads{LstmParams<T>::zeros(hidden, input), BasicTensor<T>(x.shape())};
  BasicTensor<T> dh = grad_h_last;
  BasicTensor<T> dc(Shape{hidden});
  const std::size_t width = hidden + input;

  for (std::size_t t = x.extent(0); t-- > 0;) {
    const auto& prev = forward.states[t];
    const auto& cur = forward.states[t + 1];
    const auto dz = gate_backward(forward.caches[t], prev.c, cur.c, dh, dc);
    const BasicTensor<T> v = concat(prev.h, slice_step(x, t), 0);

    BasicTensor<T> dv(Shape{width});
    auto accumulate = [&](const BasicTensor<T>& dzg, const BasicTensor<T>& W, BasicTensor<T>& dW,
                          BasicTensor<T>& db) {
      detail::gemm(detail::Op::none, detail::Op::none, hidden, width, 1, dzg.data(), v.data(),
                   dW.data(), true);
      add_inplace(db, dzg);
      detail::gemm(detail::Op::transpose, detail::Op::none, width, 1, hidden, W.data(),
                   dzg.data(), dv.data(), true);
    };
    accumulate(dz.forget, params.W_f, grads.params.W_f, grads.params.b_f);
    accumulate(dz.input, params.W_i, grads.params.W_i, grads.params.b_i);
    accumulate(dz.candidate, params.W_c, grads.params.W_c, grads.params.b_c);
    accumulate(dz.output, params.W_o, grads.params.W_o, grads.params.b_o);

    auto [dh_prev, dx_t] = split(dv, 0, hidden);
    write_step(grads.x, t, dx_t);
    dh = std::move(dh_prev);
  }
  return grads;
}

template <std::floating_point T>
BpttGrads<ConvLstmParams<T>, T> bptt_backward(const ConvLstmParams<T>& params,
                                              const Unrolled<T>& forward, const BasicTensor<T>& x,
                                              const BasicTensor<T>& grad_h_last) {
  check_sequence(forward, x);
  const std::size_t hidden = params.hidden(), input = params.input();
  const std::size_t fh = x.extent(1), fw = x.extent(2);
  require_shape(grad_h_last, Shape{fh, fw, hidden}, "bptt_backward grad_h");

  BpttGrads<ConvLstmParams<T>, T> grads{
      ConvLstmParams<T>::zeros(hidden, input, params.kernel_h(), params.kernel_w()),
      BasicTensor<T>(x.shape())};
  BasicTensor<T> dh = grad_h_last;
  BasicTensor<T> dc(Shape{fh, fw, hidden});
  const auto g = detail::make_geometry(fh, fw, hidden + input, params.kernel_h(),
                                       params.kernel_w(), Padding::same);
  std::vector<T> cols;
  std::vector<T> dcols(g.pixels() * g.patch());

  for (std::size_t t = x.extent(0); t-- > 0;) {
    const auto& prev = forward.states[t];
    const auto& cur = forward.states[t + 1];
    const auto dz = gate_backward(forward.caches[t], prev.c, cur.c, dh, dc);
    const BasicTensor<T> v = concat(prev.h, slice_step(x, t), 2);
    detail::im2col(g, v.data(), cols);

    std::fill(dcols.begin(), dcols.end(), T{0});
    auto accumulate = [&](const BasicTensor<T>& dzg, const BasicTensor<T>& K, BasicTensor<T>& dK,
                          BasicTensor<T>& db) {
      detail::gemm(detail::Op::transpose, detail::Op::none, g.patch(), hidden, g.pixels(),
                   cols.data(), dzg.data(), dK.data(), true);
      for (std::size_t p = 0; p < g.pixels(); ++p) {
        for (std::size_t ch = 0; ch < hidden; ++ch) db[ch] += dzg[p * hidden + ch];
      }
      detail::gemm(detail::Op::none, detail::Op::transpose, g.pixels(), g.patch(), hidden,
                   dzg.data(), K.data(), dcols.data(), true);
    };
    accumulate(dz.forget, params.K_f, grads.params.K_f, grads.params.b_f);
    accumulate(dz.input, params.K_i, grads.params.K_i, grads.params.b_i);
    accumulate(dz.candidate, params.K_c, grads.params.K_c, grads.params.b_c);
    accumulate(dz.output, params.K_o, grads.params.K_o, grads.params.b_o);

    BasicTensor<T> dv(v.shape());
    detail::col2im(g, dcols.data(), dv.data());
    auto [dh_prev, dx_t] = split(dv, 2, hidden);
    write_step(grads.x, t, dx_t);
    dh = std::move(dh_prev);
  }
  return grads;
}

#define CLFP_INSTANTIATE_RECURRENT(T)                                                             \
  template struct LstmParams<T>;                                                                  \
  template struct ConvLstmParams<T>;                                                              \
  template StepResult<T> lstm_step(const LstmParams<T>&, const LstmState<T>&,                     \
                                   const BasicTensor<T>&);                                        \
  template StepResult<T> convlstm_step(const ConvLstmParams<T>&, const LstmState<T>&,             \
                                       const BasicTensor<T>&);                                    \
  template LstmState<T> zero_state(const LstmParams<T>&);                                         \
  template LstmState<T> zero_state(const ConvLstmParams<T>&, std::size_t, std::size_t);           \
  template Unrolled<T> unroll_sequence(const LstmParams<T>&, const BasicTensor<T>&,               \
                                       const std::optional<LstmState<T>>&);                       \
  template Unrolled<T> unroll_sequence(const ConvLstmParams<T>&, const BasicTensor<T>&,           \
                                       const std::optional<LstmState<T>>&);                       \
  template BpttGrads<LstmParams<T>, T> bptt_backward(const LstmParams<T>&, const Unrolled<T>&,    \
                                                     const BasicTensor<T>&,                       \
                                                     const BasicTensor<T>&);                      \
  template BpttGrads<ConvLstmParams<T>, T> bptt_backward(                                         \
      const ConvLstmParams<T>&, const Unrolled<T>&, const BasicTensor<T>&, const BasicTensor<T>&);

CLFP_INSTANTIATE_RECURRENT(float)
CLFP_INSTANTIATE_RECURRENT(double)

}  // namespace clfp
