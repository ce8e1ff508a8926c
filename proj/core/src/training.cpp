#include "clfp/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clfp/errors.hpp"
#include "clfp/rng.hpp"

namespace clfp {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::uint64_t kGradcheckStream = 0x67636bULL;
constexpr std::uint64_t kGradcheckAttempts = 64;

template <std::floating_point T>
BasicTensor<T> frames_as(const Tensor& frames) {
  if constexpr (std::is_same_v<T, float>) {
    return frames;
  } else {
    return frames.cast<T>();
  }
}

template <std::floating_point T>
void check_split(const Model<T>& model, const Dataset& d, const char* which) {
  if (d.samples.empty()) throw DataError(std::string(which) + " split is empty");
  const Shape expected = model.config.input_shape();
  for (const auto& s : d.samples) {
    if (s.subject >= model.config.num_classes) {
      throw DataError(std::string(which) + " split: label " + std::to_string(s.subject) +
                      " out of range for " + std::to_string(model.config.num_classes) +
                      " classes");
    }
    if (s.frames.shape() != expected) {
      throw ShapeError(std::string(which) + " split: sample frames " + s.frames.shape().str() +
                       " do not match model input " + expected.str());
    }
  }
}

}  // namespace

template <std::floating_point T>
LossResult<T> cross_entropy_loss(const BasicTensor<T>& probs, const BasicTensor<T>& target) {
  require_same_shape(probs.shape(), target.shape(), "cross_entropy_loss");
  std::size_t ones = 0;
  for (T y : target.values()) {
    if (y == T{1}) ++ones;
    else if (y != T{0}) throw DataError("cross_entropy_loss: target is not one-hot");
  }
  if (ones != 1) throw DataError("cross_entropy_loss: target is not one-hot");

  LossResult<T> r{0.0, BasicTensor<T>(probs.shape())};
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (target[k] == T{1}) {
      r.loss = -std::log(std::max(static_cast<double>(probs[k]), 1e-12));
    }
    r.grad_logits[k] = probs[k] - target[k];
  }
  return r;
}

template <std::floating_point T>
void adam_update(BasicTensor<T>& param, const BasicTensor<T>& grad, AdamState<T>& state) {
  require_same_shape(param.shape(), grad.shape(), "adam_update");
  require_same_shape(param.shape(), state.m.shape(), "adam_update state");
  const AdamHyper& h = state.hyper;
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double m_corr = 1.0 - std::pow(h.beta1, t);
  const double v_corr = 1.0 - std::pow(h.beta2, t);
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  T* p = param.data();
  T* m = state.m.data();
  T* v = state.v.data();
  const T* g = grad.data();
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = b1 * m[i] + (T{1} - b1) * g[i];
    v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
    const double m_hat = static_cast<double>(m[i]) / m_corr;
    const double v_hat = static_cast<double>(v[i]) / v_corr;
    p[i] = static_cast<T>(static_cast<double>(p[i]) -
                          h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon));
  }
}

template <std::floating_point T>
AdamOptimizer<T>::AdamOptimizer(const ParamSet<T>& params, AdamHyper hyper) {
  for (const auto& [name, t] : params.tensors()) {
    states_.push_back(AdamState<T>::fresh(t->shape(), hyper));
  }
}

template <std::floating_point T>
void AdamOptimizer<T>::step(Model<T>& model, const Gradients<T>& grads) {
  auto params = model.params.tensors();
  const auto g = grads.tensors();
  if (params.size() != states_.size() || g.size() != states_.size()) {
    throw ShapeError("AdamOptimizer: parameter layout changed");
  }
  for (std::size_t k = 0; k < states_.size(); ++k) {
    adam_update(*params[k].second, *g[k].second, states_[k]);
  }
  ++model.generation;
}

std::string_view to_string(SplitKind s) { return s == SplitKind::train ? "train" : "val"; }

template <std::floating_point T>
SplitEvaluation evaluate(const Model<T>& model, const Dataset& data) {
  check_split(model, data, "evaluation");
  std::vector<BasicTensor<T>> probs, targets;
  probs.reserve(data.samples.size());
  targets.reserve(data.samples.size());
  double total = 0.0;
  for (const auto& s : data.samples) {
    auto fwd = model_forward(model, frames_as<T>(s.frames), Mode::eval);
    auto target = frames_as<T>(one_hot_encode(s.subject, model.config.num_classes));
    total += cross_entropy_loss(fwd.probs, target).loss;
    probs.push_back(std::move(fwd.probs));
    targets.push_back(std::move(target));
  }
  SplitEvaluation e;
  e.loss = total / static_cast<double>(data.samples.size());
  e.metrics = evaluate_predictions(std::span<const BasicTensor<T>>(probs),
                                   std::span<const BasicTensor<T>>(targets));
  return e;
}

template <std::floating_point T>
TrainResult<T> train_model(Model<T> model, const Dataset& train, const Dataset& val,
                           const TrainOptions& options) {
  check_split(model, train, "train");
  check_split(model, val, "validation");
  if (options.batch_size == 0) throw ConfigError("batch_size must be >= 1");

  TrainResult<T> result{model, model, {}, 0, {}, {}};
  AdamOptimizer<T> optimizer(model.params, options.adam);
  Gradients<T> grads = model.params.zeros_like();
  double best_accuracy = -1.0;

  std::vector<std::size_t> order(train.samples.size());
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 shuffler(derive_seed(model.config.seed, {kShuffleStream, epoch}));
    shuffle(order, shuffler);

    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      for (auto& [name, t] : grads.tensors()) t->fill(T{0});
      for (std::size_t k = start; k < stop; ++k) {
        const Sample& s = train.samples[order[k]];
        auto fwd = model_forward(model, frames_as<T>(s.frames), Mode::train, &model.dropout_rng);
        const auto loss = cross_entropy_loss(
            fwd.probs, frames_as<T>(one_hot_encode(s.subject, model.config.num_classes)));
        accumulate_backward(model, fwd.cache, loss.grad_logits, grads);
      }
      const T inv = T{1} / static_cast<T>(stop - start);
      for (auto& [name, t] : grads.tensors()) scale_inplace(*t, inv);
      optimizer.step(model, grads);
    }

    const SplitEvaluation tr = evaluate(model, train);
    const SplitEvaluation va = evaluate(model, val);
    for (const auto& [kind, ev] : {std::pair{SplitKind::train, &tr}, std::pair{SplitKind::val, &va}}) {
      result.log.records.push_back({epoch, kind, ev->loss, ev->metrics.categorical_accuracy,
                                    ev->metrics.precision, ev->metrics.recall, ev->metrics.auc});
    }
    if (va.metrics.categorical_accuracy > best_accuracy) {
      best_accuracy = va.metrics.categorical_accuracy;
      result.best = model;
      result.best_epoch = epoch;
      result.best_val = va;
    }
    result.final_val = va;
    if (options.on_epoch) options.on_epoch(epoch, tr, va);
  }
  result.final_model = std::move(model);
  return result;
}

double GradcheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, b.max_rel_error);
  return worst;
}

GradcheckReport finite_diff_gradcheck(Model<double> model, const Tensor64& x, std::size_t label,
                                      const GradcheckOptions& options) {
  if (model.config.dropout_rate != 0.0) {
    throw ConfigError("finite_diff_gradcheck: dropout_rate must be 0 (got " +
                      std::to_string(model.config.dropout_rate) +
                      "); a random mask makes the loss non-deterministic");
  }
  if (!(options.step > 0.0)) throw ConfigError("finite_diff_gradcheck: step must be > 0");
  const Tensor64 target = one_hot_encode(label, model.config.num_classes).cast<double>();

  auto loss_at = [&](const Model<double>& m) {
    const double l = cross_entropy_loss(model_forward(m, x, Mode::eval).probs, target).loss;
    if (!std::isfinite(l)) throw NumericError("finite_diff_gradcheck: non-finite loss");
    return l;
  };

  const auto fwd = model_forward(model, x, Mode::eval);
  loss_at(model);
  Gradients<double> analytic =
      model_backward(model, fwd.cache, cross_entropy_loss(fwd.probs, target).grad_logits);
  if (options.tamper) options.tamper(analytic);

  GradcheckReport report;
  auto params = model.params.tensors();
  const auto grads = analytic.tensors();
  for (std::size_t b = 0; b < params.size(); ++b) {
    Tensor64& p = *params[b].second;
    const Tensor64& g = *grads[b].second;
    BlockError block{params[b].first, 0.0, p.size()};
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + options.step;
      const double plus = loss_at(model);
      p[i] = saved - options.step;
      const double minus = loss_at(model);
      p[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = g[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      block.max_rel_error = std::max(block.max_rel_error, std::abs(a - numeric) / denom);
    }
    report.blocks.push_back(std::move(block));
  }
  return report;
}

ModelConfig tiny_gradcheck_config(Variant variant, std::uint64_t seed) {
  ModelConfig c;
  c.variant = variant;
  c.timesteps = 2;
  c.frame_height = 4;
  c.frame_width = 4;
  c.hidden_channels = 2;
  c.kernel_h = 3;
  c.kernel_w = 3;
  c.dropout_rate = 0.0;
  c.dense_units = 8;
  c.num_classes = 3;
  c.seed = seed;
  return c;
}

std::pair<Tensor64, std::size_t> gradcheck_sample(const Model<double>& model, std::uint64_t seed,
                                                  double margin) {
  const ModelConfig& config = model.config;
  auto clear = [margin](const Tensor64& t) {
    for (double z : t.values()) {
      if (std::abs(z) <= margin) return false;
    }
    return true;
  };
  for (std::uint64_t attempt = 0; attempt < kGradcheckAttempts; ++attempt) {
    SplitMix64 rng(derive_seed(seed, {kGradcheckStream, attempt}));
    Tensor64 x(config.input_shape());
    for (double& v : x.values()) v = rng.uniform();
    const auto label = static_cast<std::size_t>(rng.below(config.num_classes));
    const auto fwd = model_forward(model, x, Mode::eval);
    if (clear(fwd.cache.recurrence.last().h) && clear(fwd.cache.hidden_pre)) return {std::move(x), label};
  }
  throw NumericError("gradcheck_sample: no input keeps every ReLU input clear of zero after " +
                     std::to_string(kGradcheckAttempts) + " draws");
}

#define CLFP_INSTANTIATE_TRAINING(T)                                                             \
  template LossResult<T> cross_entropy_loss(const BasicTensor<T>&, const BasicTensor<T>&);       \
  template void adam_update(BasicTensor<T>&, const BasicTensor<T>&, AdamState<T>&);              \
  template class AdamOptimizer<T>;                                                               \
  template SplitEvaluation evaluate(const Model<T>&, const Dataset&);                            \
  template TrainResult<T> train_model(Model<T>, const Dataset&, const Dataset&,                  \
                                      const TrainOptions&);

CLFP_INSTANTIATE_TRAINING(float)
CLFP_INSTANTIATE_TRAINING(double)

}  // namespace clfp
