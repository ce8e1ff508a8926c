#include "clfp/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "clfp/errors.hpp"

namespace clfp {

namespace {

constexpr std::array<std::string_view, 11> kConfigKeys = {
    "variant",  "timesteps",    "frame_height", "frame_width", "hidden_channels", "kernel_h",
    "kernel_w", "dropout_rate", "dense_units",  "num_classes", "seed"};

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFFu));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw FormatError(std::string("checkpoint: ") + what + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint: truncated while reading ") + what);
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32(const char* what) {
    const auto b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

bool is_model_config_key(std::string_view key) {
  for (auto k : kConfigKeys) {
    if (k == key) return true;
  }
  return false;
}

KeyValues model_config_to_kv(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"timesteps", std::to_string(c.timesteps)},
          {"frame_height", std::to_string(c.frame_height)},
          {"frame_width", std::to_string(c.frame_width)},
          {"hidden_channels", std::to_string(c.hidden_channels)},
          {"kernel_h", std::to_string(c.kernel_h)},
          {"kernel_w", std::to_string(c.kernel_w)},
          {"dropout_rate", format_real(c.dropout_rate)},
          {"dense_units", std::to_string(c.dense_units)},
          {"num_classes", std::to_string(c.num_classes)},
          {"seed", std::to_string(c.seed)}};
}

ModelConfig model_config_from_kv(const KeyValues& kv, ModelConfig c) {
  for (const auto& [k, v] : kv) {
    if (k == "variant") c.variant = parse_variant(v);
    else if (k == "timesteps") c.timesteps = parse_unsigned(k, v);
    else if (k == "frame_height") c.frame_height = parse_unsigned(k, v);
    else if (k == "frame_width") c.frame_width = parse_unsigned(k, v);
    else if (k == "hidden_channels") c.hidden_channels = parse_unsigned(k, v);
    else if (k == "kernel_h") c.kernel_h = parse_unsigned(k, v);
    else if (k == "kernel_w") c.kernel_w = parse_unsigned(k, v);
    else if (k == "dropout_rate") c.dropout_rate = parse_real(k, v);
    else if (k == "dense_units") c.dense_units = parse_unsigned(k, v);
    else if (k == "num_classes") c.num_classes = parse_unsigned(k, v);
    else if (k == "seed") c.seed = parse_unsigned(k, v);
  }
  return c;
}

std::string save_checkpoint(const Model<float>& model) {
  std::string out = "CLFP";
  put_u32(out, kCheckpointVersion);
  const std::string config = format_key_values(model_config_to_kv(model.config));
  put_u32(out, checked_u32(config.size(), "config"));
  out += config;

  const auto tensors = model.params.tensors();
  put_u32(out, checked_u32(tensors.size(), "tensor count"));
  for (const auto& [name, t] : tensors) {
    put_u32(out, checked_u32(name.size(), "name"));
    out += name;
    put_u32(out, checked_u32(t->rank(), "rank"));
    for (std::size_t e : t->shape().extents()) put_u32(out, checked_u32(e, "extent"));
    for (float v : t->values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Model<float> load_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != "CLFP") throw FormatError("checkpoint: bad magic (expected CLFP)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t config_len = r.u32("config length");
  ModelConfig config;
  try {
    const KeyValues kv = parse_key_values(r.take(config_len, "config"));
    for (const auto& [k, v] : kv) {
      if (!is_model_config_key(k)) throw FormatError("checkpoint: unknown config key '" + k + "'");
    }
    config = model_config_from_kv(kv);
    config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: bad config: ") + e.what());
  }

  Model<float> model = build_model<float>(config);
  auto tensors = model.params.tensors();
  const std::uint32_t count = r.u32("tensor count");
  if (count != tensors.size()) {
    throw FormatError("checkpoint: " + std::to_string(count) + " tensors, config needs " +
                      std::to_string(tensors.size()));
  }
  for (auto& [name, t] : tensors) {
    const std::uint32_t name_len = r.u32("name length");
    const auto stored = r.take(name_len, "name");
    if (stored != name) {
      throw FormatError("checkpoint: expected tensor '" + name + "', found '" + std::string(stored) + "'");
    }
    const std::uint32_t rank = r.u32("rank");
    std::vector<std::size_t> extents(rank);
    for (auto& e : extents) e = r.u32("extent");
    const bool zero = std::find(extents.begin(), extents.end(), 0) != extents.end();
    if (rank == 0 || zero || Shape(extents) != t->shape()) {
      throw FormatError("checkpoint: tensor '" + name + "' has the wrong shape");
    }
    for (float& v : t->values()) v = std::bit_cast<float>(r.u32("payload"));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return model;
}

void save_checkpoint_file(const std::filesystem::path& path, const Model<float>& model) {
  const std::string bytes = save_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

Model<float> load_checkpoint_file(const std::filesystem::path& path) {
  return load_checkpoint(read_all(path));
}

}  // namespace clfp
