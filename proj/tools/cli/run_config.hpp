#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "clfp/keyvalue.hpp"
#include "clfp/model.hpp"
#include "clfp/synthgen.hpp"
#include "clfp/training.hpp"

namespace clfp::cli {

// Every tunable of the pipeline in one place. Read from a key=value file,
// then overridden by command-line flags, then echoed next to the outputs.
struct RunConfig {
  ModelConfig model;
  // 0 means "take the class count from the dataset".
  std::size_t num_classes = 0;

  GenConfig gen;
  AlterationParams alteration;
  Layout layout = Layout::all;

  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  AdamHyper adam;
  double val_fraction = 1.0 / 3.0;

  // Throws ConfigError for an unknown key or a bad value.
  void set(const std::string& key, const std::string& value);
  void apply(const KeyValues& kv);

  // All keys in a fixed order.
  KeyValues to_kv() const;
};

bool is_run_config_key(const std::string& key);

// Throws Error when the file cannot be read, FormatError/ConfigError on content.
KeyValues read_config_file(const std::filesystem::path& path);

void write_config_echo(const std::filesystem::path& path, const RunConfig& cfg);

std::string to_string(Layout layout);
Layout parse_layout(const std::string& text);

}  // namespace clfp::cli
