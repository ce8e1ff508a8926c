// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. `--quick` skips the two training runs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.hpp"
#include "clfp/checkpoint.hpp"
#include "clfp/metrics.hpp"
#include "clfp/recurrent.hpp"
#include "clfp/synthgen.hpp"
#include "clfp/training.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace clfp;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
  bool skipped = false;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

// 1. Finite-difference gradient check of both variants over seeds 0-4.
Outcome gradient_fidelity() {
  constexpr double kTol = 1e-4;
  const auto t0 = Clock::now();
  double worst = 0.0;
  bool cli_ok = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (Variant v : {Variant::convlstm, Variant::lstm_only}) {
      const auto model = build_model<double>(tiny_gradcheck_config(v, seed));
      const auto [x, label] = gradcheck_sample(model, seed);
      worst = std::max(worst, finite_diff_gradcheck(model, x, label).max_rel_error());
    }
    cli_ok = cli_ok && run_cli({"gradcheck", "--seed", std::to_string(seed)}) == 0;
  }
  const double secs = seconds_since(t0);
  return {worst <= kTol && cli_ok && secs < 60.0,
          fmt("max rel err %.3e (tol 1e-04), gradcheck command %s, %.1f s (limit 60 s)", worst,
              cli_ok ? "exit 0" : "FAILED", secs)};
}

// 2. Hand-evaluated cell cases and the 1x1 ConvLSTM / dense LSTM equivalence.
Outcome equation_conformance() {
  constexpr double kTol = 1e-6;
  double worst = 0.0;
  auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  const double s1 = 1.0 / (1.0 + std::exp(-1.0));

  // Zero weights, zero cell.
  const auto zero = LstmParams<double>::zeros(3, 2);
  auto prev = zero_state(zero);
  const auto a = lstm_step(zero, prev, Tensor64::vector({0.7, -1.2}));
  for (std::size_t k = 0; k < 3; ++k) {
    track(a.gates.forget[k], 0.5);
    track(a.gates.input[k], 0.5);
    track(a.gates.output[k], 0.5);
    track(a.gates.candidate[k], 0.0);
    track(a.state.c[k], 0.0);
    track(a.state.h[k], 0.0);
  }
  // Zero weights, c = 2.
  prev.c.fill(2.0);
  const auto b = lstm_step(zero, prev, Tensor64::vector({0.4, 0.1}));
  for (std::size_t k = 0; k < 3; ++k) {
    track(b.state.c[k], 1.0);
    track(b.state.h[k], 0.38079707797788);
  }
  // Unit weights, zero state, x = 1.
  auto unit = LstmParams<double>::zeros(1, 1);
  for (auto* w : {&unit.W_f, &unit.W_i, &unit.W_c, &unit.W_o}) w->fill(1.0);
  const auto c = lstm_step(unit, zero_state(unit), Tensor64::vector({1.0}));
  track(c.gates.forget[0], s1);
  track(c.gates.input[0], s1);
  track(c.gates.output[0], s1);
  track(c.gates.candidate[0], std::tanh(1.0));
  track(c.state.c[0], s1 * std::tanh(1.0));
  track(c.state.h[0], s1 * std::tanh(s1 * std::tanh(1.0)));
  // Convolutional cell with zero kernels and a constant cell of 2.
  const auto zconv = ConvLstmParams<double>::zeros(2, 1, 3, 3);
  auto cprev = zero_state(zconv, 4, 5);
  cprev.c.fill(2.0);
  const auto d = convlstm_step(zconv, cprev, Tensor64(Shape{4, 5, 1}, -0.8));
  for (double h : d.state.h.values()) track(h, 0.5 * std::tanh(1.0));
  const double hand = worst;

  // 1x1 kernels on a 1x1 frame against the dense cell.
  double equiv = 0.0;
  SplitMix64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t hidden = 1 + rng.below(5), input = 1 + rng.below(4);
    auto dense = LstmParams<double>::zeros(hidden, input);
    for (auto& [name, t] : dense.tensors()) *t = oracle::random_tensor<double>(t->shape(), rng, -1.5, 1.5);
    auto conv = ConvLstmParams<double>::zeros(hidden, input, 1, 1);
    const std::pair<Tensor64*, Tensor64*> blocks[] = {
        {&dense.W_f, &conv.K_f}, {&dense.W_i, &conv.K_i}, {&dense.W_c, &conv.K_c}, {&dense.W_o, &conv.K_o}};
    for (auto [w, k] : blocks)
      for (std::size_t o = 0; o < hidden; ++o)
        for (std::size_t j = 0; j < hidden + input; ++j) (*k)(0, 0, j, o) = (*w)(o, j);
    conv.b_f = dense.b_f;
    conv.b_i = dense.b_i;
    conv.b_c = dense.b_c;
    conv.b_o = dense.b_o;
    const LstmState<double> p{oracle::random_tensor<double>(Shape{hidden}, rng),
                              oracle::random_tensor<double>(Shape{hidden}, rng, -2, 2)};
    const auto x = oracle::random_tensor<double>(Shape{input}, rng);
    const auto d = lstm_step(dense, p, x);
    const auto q = convlstm_step(conv,
                                 {p.h.reshaped(Shape{1, 1, hidden}), p.c.reshaped(Shape{1, 1, hidden})},
                                 x.reshaped(Shape{1, 1, input}));
    for (std::size_t k = 0; k < hidden; ++k) {
      equiv = std::max({equiv, std::abs(q.state.h[k] - d.state.h[k]), std::abs(q.state.c[k] - d.state.c[k])});
    }
  }
  return {hand <= kTol && equiv <= kTol,
          fmt("hand cases max err %.2e, 1x1 equivalence max err %.2e (tol 1e-06)", hand, equiv)};
}

// 3. AUC against the pairwise Mann-Whitney count, and the formula examples.
Outcome metric_oracles() {
  auto pairwise = [](const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    double good = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1;
          good += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    return good / pairs;
  };
  SplitMix64 rng(33);
  double worst = 0.0;
  for (int pool = 0; pool < 100; ++pool) {
    const std::size_t pos = 1 + rng.below(14);
    const std::size_t neg = 1 + rng.below(200 / pos < 14 ? 200 / pos : 14);
    // Coarse score grid so ties are common.
    const std::uint64_t levels = 2 + rng.below(20);
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    for (std::size_t k = 0; k < pos + neg; ++k) {
      s.push_back(static_cast<double>(rng.below(levels)) / static_cast<double>(levels));
      y.push_back(k < pos ? 1 : 0);
    }
    worst = std::max(worst, std::abs(roc_auc(s, y) - pairwise(s, y)));
  }

  bool exact = true;
  exact = exact && classification_metrics({3, 2, 1, 4}).accuracy == 0.5;
  exact = exact && classification_metrics({2, 0, 1, 0}).precision == 2.0 / 3.0;
  exact = exact && classification_metrics({2, 0, 0, 2}).recall == 0.5;
  const auto empty = classification_metrics({0, 5, 0, 3});
  exact = exact && empty.precision == 0.0 && empty.precision_undefined;
  const std::vector<std::uint8_t> lab{1, 1, 0, 0};
  exact = exact && roc_auc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, lab) == 1.0;
  exact = exact && roc_auc(std::vector<double>{0.9, 0.3, 0.8, 0.1}, lab) == 0.75;
  exact = exact && roc_auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, lab) == 0.5;

  return {worst <= 1e-10 && exact,
          fmt("AUC vs pairwise oracle max diff %.2e over 100 pools (tol 1e-10), formula examples %s",
              worst, exact ? "exact" : "WRONG")};
}

// The desk-scale experiment shared by criteria 4 and 5.
struct DeskRun {
  double best_val = 0.0;
  std::size_t best_epoch = 0;
  double secs = 0.0;
};

DeskRun desk_run(Variant variant, std::uint64_t seed) {
  constexpr std::size_t kSide = 48, kSteps = 8;
  GenConfig gen;
  gen.num_subjects = 20;
  gen.impressions_per_subject = 10;
  gen.height = gen.width = kSide;
  gen.seed = seed;
  const Dataset data = generate_dataset(gen, {}, Layout::mixed, kSteps);
  const Split split = stratified_split(data, 1.0 / 3.0, seed);

  ModelConfig c;
  c.variant = variant;
  c.timesteps = kSteps;
  c.frame_height = kSide / kSteps;
  c.frame_width = kSide;
  c.num_classes = gen.num_subjects;
  c.seed = seed;
  TrainOptions opt;
  opt.epochs = 30;

  const auto t0 = Clock::now();
  const auto r = train_model(build_model<float>(c), split.train, split.val, opt);
  return {r.best_val.metrics.categorical_accuracy, r.best_epoch, seconds_since(t0)};
}

// 7. Two identical train invocations give identical bytes.
Outcome determinism() {
  TempDir tmp("accept-det");
  const auto data = tmp / "data";
  if (run_cli({"generate", "--subjects", "3", "--impressions", "2", "--height", "32", "--width", "32",
               "--seed", "5", "--out", data.string()}) != 0) {
    return {false, "generate failed"};
  }
  for (const char* dir : {"a", "b"}) {
    if (run_cli({"train", "--data", data.string(), "--out", (tmp / dir).string(), "--epochs", "3",
                 "--seed", "5", "--timesteps", "8", "--frame-height", "4", "--frame-width", "32",
                 "--hidden", "6", "--dense-units", "16", "--batch-size", "4", "--dropout", "0.5"}) != 0) {
      return {false, "train failed"};
    }
  }
  std::string mismatched;
  for (const char* f : {"metrics.csv", "best.ckpt", "final.ckpt", "config.txt"}) {
    const std::string a = slurp(tmp / "a" / f), b = slurp(tmp / "b" / f);
    if (a.empty() || a != b) mismatched += std::string(mismatched.empty() ? "" : ", ") + f;
  }
  return {mismatched.empty(), mismatched.empty()
                                  ? "metrics.csv, best.ckpt, final.ckpt byte-identical across two runs"
                                  : "differs: " + mismatched};
}

// 8. Checkpoint bytes survive save/load; PGM pixels survive within 1/255.
Outcome format_round_trips() {
  TempDir tmp("accept-fmt");
  bool ckpt_ok = true;
  for (Variant v : {Variant::convlstm, Variant::lstm_only}) {
    ModelConfig c;
    c.variant = v;
    c.timesteps = 4;
    c.frame_height = 3;
    c.frame_width = 8;
    c.hidden_channels = 5;
    c.dense_units = 7;
    c.num_classes = 4;
    c.seed = 17;
    auto m = build_model<float>(c);
    // Non-trivial values everywhere, including the zero-initialised biases.
    SplitMix64 rng(99);
    for (auto& [name, t] : m.params.tensors())
      for (float& x : t->values()) x = static_cast<float>(rng.uniform(-2.0, 2.0));
    const auto path = tmp / (std::string(to_string(v)) + ".ckpt");
    save_checkpoint_file(path, m);
    const auto back = load_checkpoint_file(path);
    const auto pa = m.params.tensors();
    const auto pb = back.params.tensors();
    ckpt_ok = ckpt_ok && back.config == m.config && pa.size() == pb.size();
    for (std::size_t k = 0; ckpt_ok && k < pa.size(); ++k) {
      const auto& x = pa[k].second->values();
      const auto& y = pb[k].second->values();
      ckpt_ok = x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
    }
    ckpt_ok = ckpt_ok && save_checkpoint(back) == slurp(path);
  }

  double worst = 0.0;
  GenConfig gen;
  gen.num_subjects = 3;
  gen.impressions_per_subject = 2;
  for (std::size_t s = 0; s < gen.num_subjects; ++s) {
    for (std::size_t i = 0; i < gen.impressions_per_subject; ++i) {
      Tensor img = generate_fingerprint(s, i, gen);
      const auto path = tmp / fmt("%zu_%zu.pgm", s, i);
      write_pgm_file(path, img);
      const Tensor back = normalize_and_frame(load_image_pgm_file(path), 1).reshaped(img.shape());
      worst = std::max(worst, oracle::max_abs_diff(img, back));
    }
  }
  return {ckpt_ok && worst <= 1.0 / 255.0,
          fmt("checkpoint %s, PGM max pixel error %.5f (limit 1/255 = %.5f)",
              ckpt_ok ? "bitwise identical" : "MISMATCH", worst, 1.0 / 255.0)};
}

// 6. Full-scale SOCOFing figures are not a CI target; the offline procedure has
// to be written down where users will find it.
Outcome real_data_statement() {
  const std::string readme = slurp(fs::path(CLFP_SOURCE_DIR) / "README.md");
  const bool documented = readme.find("## Comparing against SOCOFing") != std::string::npos;
  return {documented, documented ? "not a CI target; offline SOCOFing procedure documented in README.md"
                                 : "README.md lacks the offline SOCOFing procedure"};
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    const char* status = o.skipped ? "SKIP" : o.pass ? "PASS" : "FAIL";
    if (!o.pass && !o.skipped) ++failures;
    std::printf("[%s] criterion %d %-28s %s\n", status, id, name, o.detail.c_str());
    std::fflush(stdout);
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("threw: ") + e.what()};
    }
  };

  report(1, "gradient fidelity", guarded(gradient_fidelity));
  report(2, "equation conformance", guarded(equation_conformance));
  report(3, "metric oracles", guarded(metric_oracles));

  if (quick) {
    report(4, "desk-scale learning", {false, "skipped (--quick)", true});
    report(5, "convlstm vs lstm_only", {false, "skipped (--quick)", true});
  } else {
    std::vector<DeskRun> conv, lstm;
    const Outcome runs = guarded([&] {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        conv.push_back(desk_run(Variant::convlstm, seed));
        lstm.push_back(desk_run(Variant::lstm_only, seed));
        std::fprintf(stderr, "  seed %llu: convlstm %.4f (epoch %zu, %.0f s), lstm_only %.4f (epoch %zu, %.0f s)\n",
                     static_cast<unsigned long long>(seed), conv.back().best_val, conv.back().best_epoch,
                     conv.back().secs, lstm.back().best_val, lstm.back().best_epoch, lstm.back().secs);
      }
      return Outcome{true, ""};
    });
    if (!runs.pass) {
      report(4, "desk-scale learning", runs);
      report(5, "convlstm vs lstm_only", runs);
    } else {
      const DeskRun& first = conv.front();
      report(4, "desk-scale learning",
             {first.best_val >= 0.90,
              fmt("seed 0 best val accuracy %.4f at epoch %zu (need >= 0.90), %.0f s (target < 900 s)",
                  first.best_val, first.best_epoch, first.secs)});
      double mc = 0, ml = 0;
      for (std::size_t k = 0; k < 3; ++k) {
        mc += conv[k].best_val / 3.0;
        ml += lstm[k].best_val / 3.0;
      }
      report(5, "convlstm vs lstm_only",
             {mc >= ml, fmt("mean best val accuracy over seeds 0-2: convlstm %.4f, lstm_only %.4f", mc, ml)});
    }
  }

  report(6, "real-data procedure", guarded(real_data_statement));
  report(7, "determinism", guarded(determinism));
  report(8, "format round trips", guarded(format_round_trips));

  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
