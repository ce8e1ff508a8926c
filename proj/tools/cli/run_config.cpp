#include "cli/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "clfp/errors.hpp"

namespace clfp::cli {

namespace {

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CLFP_UNSIGNED(name, member)                                                        \
  Field {                                                                                  \
    name, [](RunConfig& c, const std::string& k, const std::string& v) {                   \
      c.member = static_cast<decltype(c.member)>(parse_unsigned(k, v));                    \
    },                                                                                     \
        [](const RunConfig& c) { return std::to_string(c.member); }                        \
  }
#define CLFP_REAL(name, member)                                                            \
  Field {                                                                                  \
    name, [](RunConfig& c, const std::string& k, const std::string& v) {                   \
      c.member = parse_real(k, v);                                                         \
    },                                                                                     \
        [](const RunConfig& c) { return format_real(c.member); }                           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"variant",
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.model.variant = parse_variant(v);
            },
            [](const RunConfig& c) { return to_string(c.model.variant); }},
      CLFP_UNSIGNED("timesteps", model.timesteps),
      CLFP_UNSIGNED("frame_height", model.frame_height),
      CLFP_UNSIGNED("frame_width", model.frame_width),
      CLFP_UNSIGNED("hidden_channels", model.hidden_channels),
      CLFP_UNSIGNED("kernel_h", model.kernel_h),
      CLFP_UNSIGNED("kernel_w", model.kernel_w),
      CLFP_REAL("dropout_rate", model.dropout_rate),
      CLFP_UNSIGNED("dense_units", model.dense_units),
      CLFP_UNSIGNED("num_classes", num_classes),
      // One seed drives model init, shuffling, the split and generation.
      Field{"seed",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.model.seed = parse_unsigned(k, v);
              c.gen.seed = c.model.seed;
            },
            [](const RunConfig& c) { return std::to_string(c.model.seed); }},
      CLFP_UNSIGNED("subjects", gen.num_subjects),
      CLFP_UNSIGNED("impressions", gen.impressions_per_subject),
      CLFP_UNSIGNED("image_height", gen.height),
      CLFP_UNSIGNED("image_width", gen.width),
      CLFP_REAL("freq_min", gen.freq_min),
      CLFP_REAL("freq_max", gen.freq_max),
      CLFP_REAL("noise", gen.noise),
      Field{"layout",
            [](RunConfig& c, const std::string&, const std::string& v) { c.layout = parse_layout(v); },
            [](const RunConfig& c) { return to_string(c.layout); }},
      CLFP_REAL("obliteration_radius", alteration.obliteration_radius),
      CLFP_UNSIGNED("zcut_width", alteration.zcut_width),
      CLFP_REAL("zcut_size", alteration.zcut_size),
      CLFP_REAL("rotation_radius", alteration.rotation_radius),
      CLFP_REAL("rotation_degrees", alteration.rotation_degrees),
      CLFP_UNSIGNED("epochs", epochs),
      CLFP_UNSIGNED("batch_size", batch_size),
      CLFP_REAL("learning_rate", adam.learning_rate),
      CLFP_REAL("beta1", adam.beta1),
      CLFP_REAL("beta2", adam.beta2),
      CLFP_REAL("epsilon", adam.epsilon),
      CLFP_REAL("val_fraction", val_fraction),
  };
  return table;
}

#undef CLFP_UNSIGNED
#undef CLFP_REAL

const Field* find(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find(key);
  if (f == nullptr) throw ConfigError("unknown config key '" + key + "'");
  f->set(*this, key, value);
}

void RunConfig::apply(const KeyValues& kv) {
  for (const auto& [k, v] : kv) set(k, v);
}

KeyValues RunConfig::to_kv() const {
  KeyValues out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

bool is_run_config_key(const std::string& key) { return find(key) != nullptr; }

KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_key_values(text.str());
}

void write_config_echo(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "# resolved configuration\n" << format_key_values(cfg.to_kv());
  if (!out) throw Error("short write to " + path.string());
}

std::string to_string(Layout layout) { return layout == Layout::all ? "all" : "mixed"; }

Layout parse_layout(const std::string& text) {
  if (text == "all") return Layout::all;
  if (text == "mixed") return Layout::mixed;
  throw ConfigError("layout must be 'all' or 'mixed', got '" + text + "'");
}

}  // namespace clfp::cli
