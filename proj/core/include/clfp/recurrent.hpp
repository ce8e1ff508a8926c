#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "clfp/tensor.hpp"

namespace clfp {

// Dense LSTM cell. Each gate has its own block so the forget, input,
// candidate and output equations map one-to-one onto W_f, W_i, W_c, W_o.
//   W_* : [hidden, hidden + input], acting on the concatenation [h_{t-1}, x_t]
//   b_* : [hidden]
template <std::floating_point T>
struct LstmParams {
  BasicTensor<T> W_f, W_i, W_c, W_o;
  BasicTensor<T> b_f, b_i, b_c, b_o;

  static LstmParams zeros(std::size_t hidden, std::size_t input);

  std::size_t hidden() const { return W_f.extent(0); }
  std::size_t input() const { return W_f.extent(1) - W_f.extent(0); }

  // Throws ShapeError if the blocks disagree.
  void validate() const;

  std::array<std::pair<std::string_view, BasicTensor<T>*>, 8> tensors() {
    return {{{"W_f", &W_f}, {"W_i", &W_i}, {"W_c", &W_c}, {"W_o", &W_o},
             {"b_f", &b_f}, {"b_i", &b_i}, {"b_c", &b_c}, {"b_o", &b_o}}};
  }
  std::array<std::pair<std::string_view, const BasicTensor<T>*>, 8> tensors() const {
    return {{{"W_f", &W_f}, {"W_i", &W_i}, {"W_c", &W_c}, {"W_o", &W_o},
             {"b_f", &b_f}, {"b_i", &b_i}, {"b_c", &b_c}, {"b_o", &b_o}}};
  }
};

// Convolutional LSTM cell: every W . [h, x] becomes a `same`-padded conv2d
// over the channel-wise concatenation [h_{t-1}, x_t].
//   K_* : [kh, kw, hidden + input, hidden], kh and kw odd
//   b_* : [hidden]
template <std::floating_point T>
struct ConvLstmParams {
  BasicTensor<T> K_f, K_i, K_c, K_o;
  BasicTensor<T> b_f, b_i, b_c, b_o;

  static ConvLstmParams zeros(std::size_t hidden, std::size_t input, std::size_t kernel_h,
                              std::size_t kernel_w);

  std::size_t hidden() const { return K_f.extent(3); }
  std::size_t input() const { return K_f.extent(2) - K_f.extent(3); }
  std::size_t kernel_h() const { return K_f.extent(0); }
  std::size_t kernel_w() const { return K_f.extent(1); }

  void validate() const;

  std::array<std::pair<std::string_view, BasicTensor<T>*>, 8> tensors() {
    return {{{"K_f", &K_f}, {"K_i", &K_i}, {"K_c", &K_c}, {"K_o", &K_o},
             {"b_f", &b_f}, {"b_i", &b_i}, {"b_c", &b_c}, {"b_o", &b_o}}};
  }
  std::array<std::pair<std::string_view, const BasicTensor<T>*>, 8> tensors() const {
    return {{{"K_f", &K_f}, {"K_i", &K_i}, {"K_c", &K_c}, {"K_o", &K_o},
             {"b_f", &b_f}, {"b_i", &b_i}, {"b_c", &b_c}, {"b_o", &b_o}}};
  }
};

// (h, c). Vectors [hidden] for the dense cell, frames [h, w, hidden] for the
// convolutional cell.
template <std::floating_point T>
struct LstmState {
  BasicTensor<T> h;
  BasicTensor<T> c;
};

// Gate outputs of one step, kept for backpropagation. `candidate` is c~_t.
template <std::floating_point T>
struct GateActivations {
  BasicTensor<T> forget;
  BasicTensor<T> input;
  BasicTensor<T> candidate;
  BasicTensor<T> output;
};

template <std::floating_point T>
struct StepResult {
  LstmState<T> state;
  GateActivations<T> gates;
};

template <std::floating_point T>
StepResult<T> lstm_step(const LstmParams<T>& params, const LstmState<T>& prev,
                        const BasicTensor<T>& x_t);

// x_t is a frame [h, w, input].
template <std::floating_point T>
StepResult<T> convlstm_step(const ConvLstmParams<T>& params, const LstmState<T>& prev,
                            const BasicTensor<T>& x_t);

template <std::floating_point T>
LstmState<T> zero_state(const LstmParams<T>& params);

template <std::floating_point T>
LstmState<T> zero_state(const ConvLstmParams<T>& params, std::size_t height, std::size_t width);

// Forward pass over a whole sequence. states[0] is the initial state and
// states[t + 1] the state after step t, so states.size() == caches.size() + 1.
template <std::floating_point T>
struct Unrolled {
  std::vector<LstmState<T>> states;
  std::vector<GateActivations<T>> caches;

  const LstmState<T>& last() const { return states.back(); }
};

// x: [T, input]. Zero initial state when none is given.
template <std::floating_point T>
Unrolled<T> unroll_sequence(const LstmParams<T>& params, const BasicTensor<T>& x,
                            const std::optional<LstmState<T>>& initial = std::nullopt);

// x: [T, h, w, input].
template <std::floating_point T>
Unrolled<T> unroll_sequence(const ConvLstmParams<T>& params, const BasicTensor<T>& x,
                            const std::optional<LstmState<T>>& initial = std::nullopt);

template <typename Params, std::floating_point T>
struct BpttGrads {
  Params params;
  BasicTensor<T> x;
};

// Backpropagation through time given dL/dh_T only. Parameter gradients are
// summed over timesteps; the returned grad_x has the shape of x.
template <std::floating_point T>
BpttGrads<LstmParams<T>, T> bptt_backward(const LstmParams<T>& params, const Unrolled<T>& forward,
                                          const BasicTensor<T>& x, const BasicTensor<T>& grad_h_last);

template <std::floating_point T>
BpttGrads<ConvLstmParams<T>, T> bptt_backward(const ConvLstmParams<T>& params,
                                              const Unrolled<T>& forward, const BasicTensor<T>& x,
                                              const BasicTensor<T>& grad_h_last);

}  // namespace clfp
