#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "clfp/data.hpp"
#include "clfp/metrics.hpp"
#include "clfp/model.hpp"
#include "clfp/tensor.hpp"

namespace clfp {

template <std::floating_point T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> grad_logits;  // fused softmax + cross-entropy: p - y
};

// -sum_k y_k ln(max(p_k, 1e-12)). Throws DataError unless target is one-hot.
template <std::floating_point T>
LossResult<T> cross_entropy_loss(const BasicTensor<T>& probs, const BasicTensor<T>& target);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamHyper&) const = default;
};

template <std::floating_point T>
struct AdamState {
  BasicTensor<T> m;
  BasicTensor<T> v;
  std::uint64_t t = 0;
  AdamHyper hyper;

  static AdamState fresh(const Shape& shape, AdamHyper hyper = {}) {
    return {BasicTensor<T>(shape), BasicTensor<T>(shape), 0, hyper};
  }
};

// One bias-corrected Adam step; increments state.t first.
template <std::floating_point T>
void adam_update(BasicTensor<T>& param, const BasicTensor<T>& grad, AdamState<T>& state);

// Adam over every tensor of a model, in ParamSet::tensors() order.
template <std::floating_point T>
class AdamOptimizer {
 public:
  AdamOptimizer(const ParamSet<T>& params, AdamHyper hyper);

  void step(Model<T>& model, const Gradients<T>& grads);
  const std::vector<AdamState<T>>& states() const { return states_; }

 private:
  std::vector<AdamState<T>> states_;
};

enum class SplitKind { train, val };

std::string_view to_string(SplitKind s);

// One metrics.csv row. `accuracy` is the arg-max (categorical) accuracy.
struct EpochRecord {
  std::size_t epoch = 0;
  SplitKind split = SplitKind::train;
  double loss = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double auc = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
  std::vector<EpochRecord> records;

  // Header "epoch,split,loss,accuracy,precision,recall,auc", 6 decimals.
  std::string to_csv() const;
  // Throws FormatError on a bad header or row.
  static TrainLog from_csv(std::string_view text);

  bool operator==(const TrainLog&) const = default;
};

struct SplitEvaluation {
  double loss = 0.0;  // mean cross-entropy
  MetricReport metrics;
};

// Eval-mode pass over a dataset. Frames are cast to T.
template <std::floating_point T>
SplitEvaluation evaluate(const Model<T>& model, const Dataset& data);

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  AdamHyper adam;
  // Called after each epoch with the train and validation evaluations.
  std::function<void(std::size_t epoch, const SplitEvaluation& train, const SplitEvaluation& val)>
      on_epoch;
};

template <std::floating_point T>
struct TrainResult {
  Model<T> best;          // snapshot with the highest validation accuracy
  Model<T> final_model;   // parameters after the last epoch
  TrainLog log;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  SplitEvaluation best_val;
  SplitEvaluation final_val;
};

// Mini-batch training with batch-mean gradients and one Adam step per batch.
// Epoch e shuffles with SplitMix64(derive_seed(config.seed, {stream, e})).
// Best-epoch ties keep the earlier epoch.
template <std::floating_point T>
TrainResult<T> train_model(Model<T> model, const Dataset& train, const Dataset& val,
                           const TrainOptions& options);

struct BlockError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t scalars = 0;
};

struct GradcheckReport {
  std::vector<BlockError> blocks;

  double max_rel_error() const;
  bool passed(double tolerance) const { return max_rel_error() <= tolerance; }
};

struct GradcheckOptions {
  double step = 1e-4;
  // Applied to the analytic gradients before comparison. Lets tests prove
  // that a broken backward pass is caught.
  std::function<void(Gradients<double>&)> tamper;
};

// Central differences (L(w+h) - L(w-h)) / 2h against model_backward for
// every scalar parameter; relative error |a - n| / max(|a|, |n|, 1e-8).
// Runs in double precision and requires dropout_rate == 0.
GradcheckReport finite_diff_gradcheck(Model<double> model, const Tensor64& x, std::size_t label,
                                      const GradcheckOptions& options = {});

// The small configuration used by the gradient-check command: 2 timesteps
// of 4x4 frames, 2 hidden channels, 3 classes, no dropout.
ModelConfig tiny_gradcheck_config(Variant variant, std::uint64_t seed);

// Seeded random input in [0, 1) and label. Draws are repeated until every
// ReLU input (h_T and the dense1 pre-activation) is more than `margin` away
// from zero, since finite differences straddling the kink are meaningless.
// Throws NumericError if 64 draws all land near a kink.
std::pair<Tensor64, std::size_t> gradcheck_sample(const Model<double>& model, std::uint64_t seed,
                                                  double margin = 1e-3);

}  // namespace clfp
