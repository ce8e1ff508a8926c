#include "cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "cli/curves.hpp"
#include "cli/run_config.hpp"
#include "clfp/checkpoint.hpp"
#include "clfp/data.hpp"
#include "clfp/errors.hpp"
#include "clfp/training.hpp"

namespace fs = std::filesystem;

namespace clfp::cli {

namespace {

constexpr double kGradcheckTolerance = 1e-4;

using Overrides = std::map<std::string, std::string>;

// A flag whose value is routed through RunConfig::set under `key`.
void config_flag(CLI::App* app, Overrides& ov, const std::string& flag, const std::string& key,
                 const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&ov, key](const std::string& v) { ov[key] = v; }, help);
}

RunConfig resolve(const std::string& config_path, const Overrides& ov) {
  RunConfig cfg;
  if (!config_path.empty()) cfg.apply(read_config_file(config_path));
  for (const auto& [k, v] : ov) cfg.set(k, v);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("short write to " + path.string());
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

void print_table(std::ostream& out, const std::string& label, const MetricReport& m) {
  out << "model     | Accuracy(%) | Precision(%) | Recall(%) | AUC(%)\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-9s | %11s | %12s | %9s | %6s\n", label.c_str(),
                pct(m.categorical_accuracy).c_str(), pct(m.precision).c_str(),
                pct(m.recall).c_str(), pct(m.auc).c_str());
  out << buf;
  out << "accuracy is arg-max (categorical); confusion-formula accuracy " << pct(m.accuracy)
      << "%\n";
}

std::string metric_line(const SplitEvaluation& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "loss %.4f acc %.4f prec %.4f rec %.4f auc %.4f", e.loss,
                e.metrics.categorical_accuracy, e.metrics.precision, e.metrics.recall,
                e.metrics.auc);
  return buf;
}

int cmd_generate(RunConfig cfg, const fs::path& out_dir, std::ostream& out) {
  cfg.gen.validate();
  fs::create_directories(out_dir);
  const auto rows = write_dataset(cfg.gen, cfg.alteration, cfg.layout, out_dir);
  write_config_echo(out_dir / "config.txt", cfg);
  out << "wrote " << rows.size() << " images (" << cfg.gen.num_subjects << " subjects) to "
      << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_train(RunConfig cfg, const fs::path& data_dir, const fs::path& out_dir, std::ostream& out,
              std::ostream& err) {
  if (!fs::is_directory(data_dir)) throw DataError("data directory " + data_dir.string() + " not found");
  const ModelConfig& mc = cfg.model;
  LoadedDataset loaded = load_dataset_dir(data_dir, mc.timesteps, mc.frame_height, mc.frame_width);
  for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";
  const Dataset& data = loaded.dataset;
  if (cfg.num_classes != 0 && cfg.num_classes != data.num_classes) {
    throw ConfigError("num_classes=" + std::to_string(cfg.num_classes) + " but the dataset has " +
                      std::to_string(data.num_classes) + " subjects");
  }
  cfg.num_classes = data.num_classes;
  cfg.model.num_classes = data.num_classes;
  cfg.model.validate();

  const Split split = stratified_split(data, cfg.val_fraction, cfg.model.seed);
  out << "data: " << data.samples.size() << " samples, " << data.num_classes << " classes; train "
      << split.train.samples.size() << ", val " << split.val.samples.size() << "\n";

  TrainOptions options;
  options.epochs = cfg.epochs;
  options.batch_size = cfg.batch_size;
  options.adam = cfg.adam;
  options.on_epoch = [&](std::size_t epoch, const SplitEvaluation& tr, const SplitEvaluation& va) {
    out << "epoch " << epoch << "/" << cfg.epochs << "  train " << metric_line(tr) << "  val "
        << metric_line(va) << "\n";
    out.flush();
  };
  const TrainResult<float> result =
      train_model(build_model<float>(cfg.model), split.train, split.val, options);

  fs::create_directories(out_dir);
  write_config_echo(out_dir / "config.txt", cfg);
  write_text(out_dir / "metrics.csv", result.log.to_csv());
  save_checkpoint_file(out_dir / "best.ckpt", result.best);
  save_checkpoint_file(out_dir / "final.ckpt", result.final_model);
  write_text(out_dir / "curves.svg", render_curves_svg(result.log));

  if (result.best_epoch == 0) {
    out << "no epochs run; checkpoints hold the initial parameters\n";
    return kExitOk;
  }
  out << "best epoch " << result.best_epoch << ": val " << metric_line(result.best_val) << "\n";
  print_table(out, to_string(cfg.model.variant), result.best_val.metrics);
  out << "final epoch " << cfg.epochs << ": val " << metric_line(result.final_val) << "\n";
  return kExitOk;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data_dir, const std::string& which,
             double val_fraction, fs::path out_dir, std::ostream& out, std::ostream& err) {
  const Model<float> model = load_checkpoint_file(checkpoint);
  const ModelConfig& mc = model.config;
  if (!fs::is_directory(data_dir)) throw DataError("data directory " + data_dir.string() + " not found");
  LoadedDataset loaded = load_dataset_dir(data_dir, mc.timesteps, mc.frame_height, mc.frame_width);
  for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";
  if (loaded.dataset.num_classes != mc.num_classes) {
    throw DataError("class-count mismatch: checkpoint has " + std::to_string(mc.num_classes) +
                    " classes, dataset has " + std::to_string(loaded.dataset.num_classes));
  }

  Dataset subset;
  if (which == "all") {
    subset = std::move(loaded.dataset);
  } else {
    Split split = stratified_split(loaded.dataset, val_fraction, mc.seed);
    subset = which == "train" ? std::move(split.train) : std::move(split.val);
  }
  const SplitEvaluation ev = evaluate(model, subset);

  if (out_dir.empty()) out_dir = checkpoint.parent_path();
  if (out_dir.empty()) out_dir = ".";
  fs::create_directories(out_dir);
  char row[256];
  std::snprintf(row, sizeof row, "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", which.c_str(),
                subset.samples.size(), ev.loss, ev.metrics.categorical_accuracy,
                ev.metrics.precision, ev.metrics.recall, ev.metrics.auc, ev.metrics.accuracy);
  write_text(out_dir / "eval.csv",
             std::string("split,samples,loss,accuracy,precision,recall,auc,confusion_accuracy\n") + row);

  out << "split " << which << ": " << subset.samples.size() << " samples, loss " << ev.loss << "\n";
  print_table(out, to_string(mc.variant), ev.metrics);
  return kExitOk;
}

int cmd_gradcheck(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                  const std::string& which, double step, bool corrupt, std::ostream& out) {
  KeyValues kv;
  if (!config_path.empty()) {
    kv = read_config_file(config_path);
    RunConfig().apply(kv);  // rejects unknown keys and bad values
  }
  std::uint64_t seed = 0;
  KeyValues shape_keys;
  for (const auto& [k, v] : kv) {
    if (k == "seed") seed = parse_unsigned(k, v);
    else if (k != "variant" && is_model_config_key(k)) shape_keys.emplace_back(k, v);
  }
  if (seed_flag) seed = *seed_flag;

  std::vector<Variant> variants;
  if (which == "both") variants = {Variant::convlstm, Variant::lstm_only};
  else variants = {parse_variant(which)};

  GradcheckOptions options;
  options.step = step;
  if (corrupt) {
    options.tamper = [](Gradients<double>& g) {
      for (auto& [name, t] : g.tensors()) scale_inplace(*t, 1.01);
    };
  }

  bool ok = true;
  for (Variant v : variants) {
    const ModelConfig config = model_config_from_kv(shape_keys, tiny_gradcheck_config(v, seed));
    config.validate();
    const Model<double> model = build_model<double>(config);
    const auto [x, label] = gradcheck_sample(model, seed);
    const GradcheckReport report = finite_diff_gradcheck(model, x, label, options);

    out << "gradcheck " << to_string(v) << " seed " << seed << " (T=" << config.timesteps << ", "
        << config.frame_height << "x" << config.frame_width << " frames, " << config.hidden_channels
        << " hidden, " << config.num_classes << " classes)\n";
    char buf[160];
    for (const auto& b : report.blocks) {
      std::snprintf(buf, sizeof buf, "  %-18s max rel err %.3e  (%zu scalars)\n", b.name.c_str(),
                    b.max_rel_error, b.scalars);
      out << buf;
    }
    const bool passed = report.passed(kGradcheckTolerance);
    std::snprintf(buf, sizeof buf, "  overall            max rel err %.3e  %s (tolerance %.0e)\n",
                  report.max_rel_error(), passed ? "PASS" : "FAIL", kGradcheckTolerance);
    out << buf;
    ok = ok && passed;
  }
  return ok ? kExitOk : kExitVerification;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ConvLSTM damaged-fingerprint classifier"};
  app.require_subcommand(1);
  Overrides ov;
  std::string config_path;

  auto* gen = app.add_subcommand("generate", "write a synthetic PGM dataset");
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--config", config_path, "key=value config file");
  config_flag(gen, ov, "--subjects", "subjects", "number of subjects");
  config_flag(gen, ov, "--impressions", "impressions", "impressions per subject");
  config_flag(gen, ov, "--seed", "seed", "master seed");
  config_flag(gen, ov, "--height", "image_height", "image height in pixels");
  config_flag(gen, ov, "--width", "image_width", "image width in pixels");
  config_flag(gen, ov, "--layout", "layout", "all: pristine + 3 alterations per impression; mixed: one each");
  config_flag(gen, ov, "--noise", "noise", "additive noise amplitude");
  config_flag(gen, ov, "--freq-min", "freq_min", "lowest ridge frequency (cycles/pixel)");
  config_flag(gen, ov, "--freq-max", "freq_max", "highest ridge frequency (cycles/pixel)");
  config_flag(gen, ov, "--obliteration-radius", "obliteration_radius", "disc radius, fraction of side");
  config_flag(gen, ov, "--zcut-width", "zcut_width", "Z stroke width in pixels");
  config_flag(gen, ov, "--zcut-size", "zcut_size", "Z box side, fraction of side");
  config_flag(gen, ov, "--rotation-radius", "rotation_radius", "rotated patch radius, fraction of side");
  config_flag(gen, ov, "--rotation-degrees", "rotation_degrees", "patch rotation angle");

  auto* train = app.add_subcommand("train", "train a classifier on a PGM directory");
  std::string train_data, train_out;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "run directory")->required();
  train->add_option("--config", config_path, "key=value config file");
  config_flag(train, ov, "--epochs", "epochs", "training epochs");
  config_flag(train, ov, "--variant", "variant", "convlstm or lstm_only");
  config_flag(train, ov, "--seed", "seed", "seed for init, split and shuffling");
  config_flag(train, ov, "--batch-size", "batch_size", "mini-batch size");
  config_flag(train, ov, "--lr", "learning_rate", "Adam learning rate");
  config_flag(train, ov, "--val-fraction", "val_fraction", "validation share per class");
  config_flag(train, ov, "--timesteps", "timesteps", "frames per image");
  config_flag(train, ov, "--frame-height", "frame_height", "rows per frame");
  config_flag(train, ov, "--frame-width", "frame_width", "frame width");
  config_flag(train, ov, "--hidden", "hidden_channels", "recurrent channels / units");
  config_flag(train, ov, "--dropout", "dropout_rate", "dropout rate");
  config_flag(train, ov, "--dense-units", "dense_units", "hidden dense width");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_split = "all", eval_out;
  double eval_fraction = 1.0 / 3.0;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--split", eval_split, "all, train or val")
      ->check(CLI::IsMember({"all", "train", "val"}));
  eval->add_option("--val-fraction", eval_fraction, "validation share used by --split");
  eval->add_option("--out", eval_out, "directory for eval.csv (default: next to the checkpoint)");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  std::uint64_t grad_seed = 0;
  std::string grad_variant = "both";
  double grad_step = 1e-4;
  bool corrupt = false;
  grad->add_option("--config", config_path, "key=value config overriding the tiny shape");
  auto* seed_opt = grad->add_option("--seed", grad_seed, "parameter and sample seed");
  grad->add_option("--variant", grad_variant, "convlstm, lstm_only or both")
      ->check(CLI::IsMember({"convlstm", "lstm_only", "both"}));
  grad->add_option("--step", grad_step, "finite-difference step");
  // Test hook: skews the analytic gradients so the failure path can be exercised.
  grad->add_flag("--corrupt-backward", corrupt)->group("");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (gen->parsed()) return cmd_generate(resolve(config_path, ov), gen_out, out);
    if (train->parsed()) return cmd_train(resolve(config_path, ov), train_data, train_out, out, err);
    if (eval->parsed()) {
      return cmd_eval(eval_ckpt, eval_data, eval_split, eval_fraction, eval_out, out, err);
    }
    std::optional<std::uint64_t> seed;
    if (seed_opt->count() > 0) seed = grad_seed;
    return cmd_gradcheck(config_path, seed, grad_variant, grad_step, corrupt, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace clfp::cli
