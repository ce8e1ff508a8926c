#include "clfp/model.hpp"

#include <cmath>

#include "clfp/errors.hpp"
#include "clfp/ops.hpp"
#include "detail/kernels.hpp"

namespace clfp {

namespace {

constexpr std::uint64_t kDropoutStream = 0x64726f706f7574ULL;

template <std::floating_point T>
void glorot_fill(BasicTensor<T>& t, std::size_t fan_in, std::size_t fan_out, SplitMix64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(-limit, limit));
}

}  // namespace

std::string to_string(Variant v) {
  return v == Variant::convlstm ? "convlstm" : "lstm_only";
}

Variant parse_variant(const std::string& text) {
  if (text == "convlstm") return Variant::convlstm;
  if (text == "lstm_only") return Variant::lstm_only;
  throw ConfigError("unknown variant '" + text + "' (expected convlstm or lstm_only)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be >= 1");
  };
  positive(timesteps, "timesteps");
  positive(frame_height, "frame_height");
  positive(frame_width, "frame_width");
  positive(hidden_channels, "hidden_channels");
  positive(dense_units, "dense_units");
  if (num_classes < 2) {
    throw ConfigError("num_classes must be >= 2, got " + std::to_string(num_classes));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must lie in [0, 1), got " + std::to_string(dropout_rate));
  }
  if (variant == Variant::convlstm && (kernel_h % 2 == 0 || kernel_w % 2 == 0)) {
    throw ConfigError("kernel extents must be odd, got " + std::to_string(kernel_h) + "x" +
                      std::to_string(kernel_w));
  }
}

std::size_t ModelConfig::flat_features() const {
  return variant == Variant::convlstm ? frame_height * frame_width * hidden_channels
                                      : hidden_channels;
}

template <std::floating_point T>
DenseParams<T> DenseParams<T>::zeros(std::size_t out, std::size_t in) {
  return {BasicTensor<T>(Shape{out, in}), BasicTensor<T>(Shape{out})};
}

template <std::floating_point T>
BasicTensor<T> dense_forward(const DenseParams<T>& p, const BasicTensor<T>& x) {
  if (p.W.rank() != 2 || p.b.shape() != Shape{p.out()}) {
    throw ShapeError("dense: inconsistent parameters W " + p.W.shape().str() + ", b " +
                     p.b.shape().str());
  }
  if (x.shape() != Shape{p.in()}) {
    throw ShapeError("dense: input " + x.shape().str() + " does not match W " + p.W.shape().str());
  }
  BasicTensor<T> y = p.b;
  detail::gemm(detail::Op::none, detail::Op::none, p.out(), 1, p.in(), p.W.data(), x.data(),
               y.data(), true);
  return y;
}

template <std::floating_point T>
DenseGrads<T> dense_backward(const DenseParams<T>& p, const BasicTensor<T>& x,
                             const BasicTensor<T>& grad_y) {
  if (x.shape() != Shape{p.in()} || grad_y.shape() != Shape{p.out()}) {
    throw ShapeError("dense_backward: x " + x.shape().str() + " / grad " + grad_y.shape().str() +
                     " do not match W " + p.W.shape().str());
  }
  DenseGrads<T> g{DenseParams<T>::zeros(p.out(), p.in()), BasicTensor<T>(x.shape())};
  detail::gemm(detail::Op::none, detail::Op::none, p.out(), p.in(), 1, grad_y.data(), x.data(),
               g.params.W.data(), false);
  g.params.b = grad_y;
  detail::gemm(detail::Op::transpose, detail::Op::none, p.in(), 1, p.out(), p.W.data(),
               grad_y.data(), g.x.data(), false);
  return g;
}

template <std::floating_point T>
std::pair<BasicTensor<T>, DropoutMask<T>> dropout_apply(const BasicTensor<T>& x, double rate,
                                                        Mode mode, SplitMix64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  DropoutMask<T> mask{BasicTensor<T>(x.shape(), T{1}), rate};
  if (mode == Mode::eval || rate == 0.0) return {x, std::move(mask)};
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  BasicTensor<T> y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T m = rng.uniform() < rate ? T{0} : keep_scale;
    mask.mask[i] = m;
    y[i] *= m;
  }
  return {std::move(y), std::move(mask)};
}

template <std::floating_point T>
std::vector<std::pair<std::string, BasicTensor<T>*>> ParamSet<T>::tensors() {
  std::vector<std::pair<std::string, BasicTensor<T>*>> out;
  std::visit(
      [&](auto& r) {
        const std::string prefix =
            std::is_same_v<std::decay_t<decltype(r)>, ConvLstmParams<T>> ? "convlstm." : "lstm.";
        for (auto& [name, t] : r.tensors()) out.emplace_back(prefix + std::string(name), t);
      },
      recurrent);
  out.emplace_back("dense1.W", &dense1.W);
  out.emplace_back("dense1.b", &dense1.b);
  out.emplace_back("dense2.W", &dense2.W);
  out.emplace_back("dense2.b", &dense2.b);
  return out;
}

template <std::floating_point T>
std::vector<std::pair<std::string, const BasicTensor<T>*>> ParamSet<T>::tensors() const {
  auto named = const_cast<ParamSet*>(this)->tensors();
  std::vector<std::pair<std::string, const BasicTensor<T>*>> out;
  out.reserve(named.size());
  for (auto& [name, t] : named) out.emplace_back(std::move(name), t);
  return out;
}

template <std::floating_point T>
ParamSet<T> ParamSet<T>::zeros_like() const {
  ParamSet<T> z = *this;
  for (auto& [name, t] : z.tensors()) t->fill(T{0});
  return z;
}

template <std::floating_point T>
std::size_t ParamSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += t->size();
  return n;
}

template <std::floating_point T>
Model<T> build_model(const ModelConfig& config) {
  config.validate();
  Model<T> m{config, {}, SplitMix64(derive_seed(config.seed, {kDropoutStream})), 0};
  const std::size_t hidden = config.hidden_channels;
  if (config.variant == Variant::convlstm) {
    m.params.recurrent = ConvLstmParams<T>::zeros(hidden, 1, config.kernel_h, config.kernel_w);
  } else {
    m.params.recurrent = LstmParams<T>::zeros(hidden, config.frame_height * config.frame_width);
  }
  m.params.dense1 = DenseParams<T>::zeros(config.dense_units, config.flat_features());
  m.params.dense2 = DenseParams<T>::zeros(config.num_classes, config.dense_units);

  SplitMix64 rng(config.seed);
  const std::size_t receptive = config.variant == Variant::convlstm
                                    ? config.kernel_h * config.kernel_w
                                    : 1;
  for (auto& [name, t] : m.params.tensors()) {
    if (t->rank() == 1) continue;  // biases stay zero
    std::size_t fan_in = 0, fan_out = 0;
    if (t->rank() == 4) {
      fan_in = receptive * t->extent(2);
      fan_out = receptive * t->extent(3);
    } else {
      fan_in = t->extent(1);
      fan_out = t->extent(0);
    }
    glorot_fill(*t, fan_in, fan_out, rng);
  }
  return m;
}

template <std::floating_point T>
ForwardResult<T> model_forward(const Model<T>& m, const BasicTensor<T>& x, Mode mode,
                               SplitMix64* rng) {
  const ModelConfig& cfg = m.config;
  if (x.shape() != cfg.input_shape()) {
    throw ShapeError("model_forward: expected input " + cfg.input_shape().str() + ", got " +
                     x.shape().str());
  }
  ForwardResult<T> out;
  ForwardCache<T>& c = out.cache;
  c.generation = m.generation;

  if (const auto* conv = std::get_if<ConvLstmParams<T>>(&m.params.recurrent)) {
    c.x = x;
    c.recurrence = unroll_sequence(*conv, c.x);
  } else {
    c.x = x.reshaped(Shape{cfg.timesteps, cfg.frame_height * cfg.frame_width});
    c.recurrence = unroll_sequence(std::get<LstmParams<T>>(m.params.recurrent), c.x);
  }
  const BasicTensor<T>& h_last = c.recurrence.last().h;
  c.features = activate(Activation::relu, h_last).reshaped(Shape{h_last.size()});

  if (mode == Mode::train && cfg.dropout_rate > 0.0 && rng == nullptr) {
    throw ConfigError("model_forward: train mode with dropout needs a random generator");
  }
  SplitMix64 unused;
  std::tie(c.dropped, c.dropout) =
      dropout_apply(c.features, cfg.dropout_rate, mode, rng ? *rng : unused);

  c.hidden_pre = dense_forward(m.params.dense1, c.dropped);
  c.hidden = activate(Activation::relu, c.hidden_pre);
  c.logits = dense_forward(m.params.dense2, c.hidden);
  out.probs = activate(Activation::softmax, c.logits);
  return out;
}

template <std::floating_point T>
void accumulate_backward(const Model<T>& m, const ForwardCache<T>& cache,
                         const BasicTensor<T>& grad_logits, Gradients<T>& into) {
  if (cache.generation != m.generation) {
    throw Error("model_backward: stale forward cache (parameters changed since the forward pass)");
  }
  const auto& p = m.params;
  if (grad_logits.shape() != Shape{p.dense2.out()}) {
    throw ShapeError("model_backward: gradient " + grad_logits.shape().str() +
                     " does not match output width " + std::to_string(p.dense2.out()));
  }

  // dense2
  detail::gemm(detail::Op::none, detail::Op::none, p.dense2.out(), p.dense2.in(), 1,
               grad_logits.data(), cache.hidden.data(), into.dense2.W.data(), true);
  add_inplace(into.dense2.b, grad_logits);
  BasicTensor<T> d_hidden(Shape{p.dense2.in()});
  detail::gemm(detail::Op::transpose, detail::Op::none, p.dense2.in(), 1, p.dense2.out(),
               p.dense2.W.data(), grad_logits.data(), d_hidden.data(), false);

  // ReLU + dense1
  for (std::size_t k = 0; k < d_hidden.size(); ++k) {
    if (!(cache.hidden_pre[k] > T{0})) d_hidden[k] = T{0};
  }
  detail::gemm(detail::Op::none, detail::Op::none, p.dense1.out(), p.dense1.in(), 1,
               d_hidden.data(), cache.dropped.data(), into.dense1.W.data(), true);
  add_inplace(into.dense1.b, d_hidden);
  BasicTensor<T> d_features(Shape{p.dense1.in()});
  detail::gemm(detail::Op::transpose, detail::Op::none, p.dense1.in(), 1, p.dense1.out(),
               p.dense1.W.data(), d_hidden.data(), d_features.data(), false);

  // dropout, flatten, ReLU on h_T
  const BasicTensor<T>& h_last = cache.recurrence.last().h;
  BasicTensor<T> d_h(h_last.shape());
  for (std::size_t k = 0; k < d_h.size(); ++k) {
    d_h[k] = h_last[k] > T{0} ? d_features[k] * cache.dropout.mask[k] : T{0};
  }

  std::visit(
      [&](const auto& rp) {
        using P = std::decay_t<decltype(rp)>;
        auto g = bptt_backward(rp, cache.recurrence, cache.x, d_h);
        auto& acc = std::get<P>(into.recurrent);
        auto dst = acc.tensors();
        auto src = g.params.tensors();
        for (std::size_t k = 0; k < dst.size(); ++k) add_inplace(*dst[k].second, *src[k].second);
      },
      p.recurrent);
}

template <std::floating_point T>
Gradients<T> model_backward(const Model<T>& m, const ForwardCache<T>& cache,
                            const BasicTensor<T>& grad_logits) {
  Gradients<T> g = m.params.zeros_like();
  accumulate_backward(m, cache, grad_logits, g);
  return g;
}

template <std::floating_point T>
std::size_t argmax(const BasicTensor<T>& probs) {
  if (probs.empty()) throw ShapeError("argmax of an empty tensor");
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return best;
}

template <std::floating_point T>
std::size_t predict(const Model<T>& m, const BasicTensor<T>& x) {
  return argmax(model_forward(m, x, Mode::eval).probs);
}

#define CLFP_INSTANTIATE_MODEL(T)                                                                \
  template struct DenseParams<T>;                                                                \
  template struct ParamSet<T>;                                                                   \
  template BasicTensor<T> dense_forward(const DenseParams<T>&, const BasicTensor<T>&);           \
  template DenseGrads<T> dense_backward(const DenseParams<T>&, const BasicTensor<T>&,            \
                                        const BasicTensor<T>&);                                  \
  template std::pair<BasicTensor<T>, DropoutMask<T>> dropout_apply(const BasicTensor<T>&,        \
                                                                   double, Mode, SplitMix64&);   \
  template Model<T> build_model(const ModelConfig&);                                             \
  template ForwardResult<T> model_forward(const Model<T>&, const BasicTensor<T>&, Mode,          \
                                          SplitMix64*);                                          \
  template Gradients<T> model_backward(const Model<T>&, const ForwardCache<T>&,                  \
                                       const BasicTensor<T>&);                                   \
  template void accumulate_backward(const Model<T>&, const ForwardCache<T>&,                     \
                                    const BasicTensor<T>&, Gradients<T>&);                       \
  template std::size_t argmax(const BasicTensor<T>&);                                            \
  template std::size_t predict(const Model<T>&, const BasicTensor<T>&);

CLFP_INSTANTIATE_MODEL(float)
CLFP_INSTANTIATE_MODEL(double)

}  // namespace clfp
