#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "clfp/keyvalue.hpp"
#include "clfp/model.hpp"

namespace clfp {

// Checkpoint layout, all integers u32 little-endian:
//   "CLFP" | version (1)
//   config length | ModelConfig as key=value text
//   tensor count
//   per tensor: name length | name | rank | extents... | f32 LE payload
// Tensors appear in ParamSet::tensors() order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

KeyValues model_config_to_kv(const ModelConfig& config);
// Reads the ModelConfig keys present in `kv`; other keys are left to the caller.
ModelConfig model_config_from_kv(const KeyValues& kv, ModelConfig base = {});
bool is_model_config_key(std::string_view key);

std::string save_checkpoint(const Model<float>& model);
// Throws FormatError on bad magic, version, truncation or layout mismatch.
Model<float> load_checkpoint(std::string_view bytes);

void save_checkpoint_file(const std::filesystem::path& path, const Model<float>& model);
Model<float> load_checkpoint_file(const std::filesystem::path& path);

}  // namespace clfp
