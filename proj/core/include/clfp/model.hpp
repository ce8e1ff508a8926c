#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "clfp/recurrent.hpp"
#include "clfp/rng.hpp"
#include "clfp/tensor.hpp"

namespace clfp {

enum class Variant { convlstm, lstm_only };
enum class Mode { train, eval };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

// Hyperparameters of the classifier:
//   recurrent (ConvLSTM or dense LSTM) -> ReLU -> flatten -> dropout
//   -> dense(dense_units, ReLU) -> dense(num_classes, softmax)
// The input is a sequence of `timesteps` frames of frame_height x frame_width.
struct ModelConfig {
  Variant variant = Variant::convlstm;
  std::size_t timesteps = 8;
  std::size_t frame_height = 12;
  std::size_t frame_width = 96;
  std::size_t hidden_channels = 64;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  double dropout_rate = 0.5;
  std::size_t dense_units = 100;
  std::size_t num_classes = 2;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;

  std::size_t image_height() const { return timesteps * frame_height; }
  std::size_t image_width() const { return frame_width; }
  Shape input_shape() const { return Shape{timesteps, frame_height, frame_width, 1}; }

  // Width of flatten(ReLU(h_T)), i.e. the input of the first dense layer.
  std::size_t flat_features() const;

  bool operator==(const ModelConfig&) const = default;
};

// Fully connected layer y = W x + b with W: [out, in], b: [out].
template <std::floating_point T>
struct DenseParams {
  BasicTensor<T> W;
  BasicTensor<T> b;

  static DenseParams zeros(std::size_t out, std::size_t in);
  std::size_t out() const { return W.extent(0); }
  std::size_t in() const { return W.extent(1); }
};

template <std::floating_point T>
BasicTensor<T> dense_forward(const DenseParams<T>& p, const BasicTensor<T>& x);

template <std::floating_point T>
struct DenseGrads {
  DenseParams<T> params;
  BasicTensor<T> x;
};

template <std::floating_point T>
DenseGrads<T> dense_backward(const DenseParams<T>& p, const BasicTensor<T>& x,
                             const BasicTensor<T>& grad_y);

// Inverted-dropout mask: every entry is 0 or 1/(1 - rate).
template <std::floating_point T>
struct DropoutMask {
  BasicTensor<T> mask;
  double rate = 0.0;
};

template <std::floating_point T>
std::pair<BasicTensor<T>, DropoutMask<T>> dropout_apply(const BasicTensor<T>& x, double rate,
                                                        Mode mode, SplitMix64& rng);

// Every trainable tensor of the classifier. Gradients share the layout.
template <std::floating_point T>
struct ParamSet {
  std::variant<ConvLstmParams<T>, LstmParams<T>> recurrent;
  DenseParams<T> dense1;
  DenseParams<T> dense2;

  // Stable order and names ("convlstm.K_f", ..., "dense2.b"); used by the
  // optimizer, the gradient checker and the checkpoint format.
  std::vector<std::pair<std::string, BasicTensor<T>*>> tensors();
  std::vector<std::pair<std::string, const BasicTensor<T>*>> tensors() const;

  ParamSet zeros_like() const;
  std::size_t scalar_count() const;
};

template <std::floating_point T>
using Gradients = ParamSet<T>;

template <std::floating_point T>
struct Model {
  ModelConfig config;
  ParamSet<T> params;
  SplitMix64 dropout_rng;
  // Bumped whenever parameters change; forward caches remember it.
  std::uint64_t generation = 0;
};

// Glorot-uniform weights U(-L, L), L = sqrt(6 / (fan_in + fan_out)), zero
// biases. Draws come from SplitMix64(config.seed) in ParamSet::tensors()
// order, row-major within each tensor, in double precision before casting.
template <std::floating_point T>
Model<T> build_model(const ModelConfig& config);

// Everything model_backward needs from a forward pass.
template <std::floating_point T>
struct ForwardCache {
  BasicTensor<T> x;          // recurrent input: [T,h,w,1] or [T,h*w]
  Unrolled<T> recurrence;
  BasicTensor<T> features;   // flatten(ReLU(h_T))
  DropoutMask<T> dropout;
  BasicTensor<T> dropped;
  BasicTensor<T> hidden_pre; // dense1 pre-activation
  BasicTensor<T> hidden;     // ReLU(hidden_pre)
  BasicTensor<T> logits;
  std::uint64_t generation = 0;
};

template <std::floating_point T>
struct ForwardResult {
  BasicTensor<T> probs;
  ForwardCache<T> cache;
};

// x: [timesteps, frame_height, frame_width, 1]. Train mode with a nonzero
// dropout rate draws the mask from `rng`, which is then required.
template <std::floating_point T>
ForwardResult<T> model_forward(const Model<T>& m, const BasicTensor<T>& x, Mode mode,
                               SplitMix64* rng = nullptr);

// Gradients of every parameter given dL/dlogits (the pre-softmax output).
template <std::floating_point T>
Gradients<T> model_backward(const Model<T>& m, const ForwardCache<T>& cache,
                            const BasicTensor<T>& grad_logits);

// Same as model_backward but adds into an existing accumulator.
template <std::floating_point T>
void accumulate_backward(const Model<T>& m, const ForwardCache<T>& cache,
                         const BasicTensor<T>& grad_logits, Gradients<T>& into);

// Index of the largest entry; ties go to the lower index.
template <std::floating_point T>
std::size_t argmax(const BasicTensor<T>& probs);

template <std::floating_point T>
std::size_t predict(const Model<T>& m, const BasicTensor<T>& x);

}  // namespace clfp
