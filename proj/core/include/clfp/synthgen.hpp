#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clfp/data.hpp"
#include "clfp/tensor.hpp"

namespace clfp {

// Procedural fingerprint-like images. Each subject owns a smooth ridge
// field; each impression re-renders it under a small rigid jitter plus noise.
struct GenConfig {
  std::size_t num_subjects = 20;
  std::size_t impressions_per_subject = 10;
  std::size_t height = 96;
  std::size_t width = 96;
  double freq_min = 0.08;  // cycles / pixel
  double freq_max = 0.12;
  double noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const GenConfig&) const = default;
};

// Geometry of the three alterations. Fractions are relative to the shorter
// image side.
struct AlterationParams {
  double obliteration_radius = 0.2;
  std::size_t zcut_width = 4;
  double zcut_size = 0.5;  // side of the square the Z is drawn in
  double rotation_radius = 0.25;
  double rotation_degrees = 90.0;

  bool operator==(const AlterationParams&) const = default;
};

Tensor generate_fingerprint(std::size_t subject, std::size_t impression, const GenConfig& cfg);

// 1 where `kind` modifies pixels of an h x w image, 0 elsewhere. Throws
// ConfigError when the geometry does not fit.
std::vector<std::uint8_t> alteration_region(std::size_t height, std::size_t width,
                                            Alteration kind, const AlterationParams& params,
                                            std::uint64_t seed);

// obliteration: disc of uniform noise in [0.4, 0.6] at a seeded position.
// zcut: top bar, diagonal, bottom bar of the given width set to 1.0.
// central_rotation: centred disc rotated with bilinear resampling.
// Pixels outside alteration_region are copied bit-for-bit.
Tensor apply_alteration(const Tensor& image, Alteration kind, const AlterationParams& params,
                        std::uint64_t seed);

// Which alterations each impression receives.
//   all:   every impression yields the pristine image and all three alterations
//   mixed: impression i yields only alteration (i mod 4), pristine first
enum class Layout { all, mixed };

struct SyntheticItem {
  std::size_t subject;
  std::size_t impression;
  Alteration alteration;
};

std::vector<SyntheticItem> plan_items(const GenConfig& cfg, Layout layout);

// Final image of one item, quantized to 8 bits exactly as its PGM file.
Tensor render_item(const SyntheticItem& item, const GenConfig& cfg, const AlterationParams& params);

// In-memory dataset identical to writing the PGMs and loading them back.
Dataset generate_dataset(const GenConfig& cfg, const AlterationParams& params, Layout layout,
                         std::size_t timesteps);

struct ManifestRow {
  std::size_t subject;
  Alteration alteration;
  std::size_t impression;
  std::string path;
};

// Writes <subject>__<tag>__<impression>.pgm files and manifest.csv
// ("subject,alteration,impression,path") into out_dir.
std::vector<ManifestRow> write_dataset(const GenConfig& cfg, const AlterationParams& params,
                                       Layout layout, const std::filesystem::path& out_dir);

}  // namespace clfp
