#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clfp/tensor.hpp"

namespace clfp {

enum class Alteration { none, obliteration, zcut, central_rotation };

// File-name tags: none, obl, zcut, crot.
std::string_view alteration_tag(Alteration a);
std::optional<Alteration> parse_alteration_tag(std::string_view tag);

struct Sample {
  std::size_t subject = 0;
  Alteration alteration = Alteration::none;
  Tensor frames;  // [T, frame_h, frame_w, 1], values in [0, 1]
};

enum class Provenance { synthetic, external };

struct Dataset {
  std::vector<Sample> samples;
  std::size_t num_classes = 0;
  Provenance provenance = Provenance::synthetic;
  // Original subject id of each class index, when loaded from disk.
  std::vector<std::uint64_t> subject_ids;

  // Throws DataError unless every label is in range and every class appears.
  void validate() const;
  std::vector<std::size_t> class_counts() const;
};

// Binary PGM ("P5", maxval 255). Returns raw 0..255 values as [h, w, 1].
// Comments (#...) and arbitrary whitespace are accepted in the header.
Tensor load_image_pgm(std::string_view bytes);
Tensor load_image_pgm_file(const std::filesystem::path& path);

// P5 bytes of an image with values in [0, 1], quantized by round(v * 255).
std::string encode_pgm(const Tensor& unit_image);
void write_pgm_file(const std::filesystem::path& path, const Tensor& unit_image);

// [h, w, 1] raw pixels -> [T, h/T, w, 1] in [0, 1]; band 0 is the top.
Tensor normalize_and_frame(const Tensor& raw_image, std::size_t timesteps);

// Center crop and/or zero-pad an [h, w, 1] image to the requested size.
Tensor center_fit(const Tensor& image, std::size_t height, std::size_t width);

Tensor one_hot_encode(std::size_t label, std::size_t num_classes);

struct Split {
  Dataset train;
  Dataset val;
};

// Per class: shuffle with a seeded generator, send
// clamp(floor(n * val_fraction + 0.5), 1, n - 1) samples to validation.
// Both halves keep the original sample order.
Split stratified_split(const Dataset& d, double val_fraction, std::uint64_t seed);

// Number of validation samples stratified_split takes from a class of n.
std::size_t validation_count(std::size_t n, double val_fraction);

// Parses "<subject>__<tag>__<index>.pgm".
struct SampleName {
  std::uint64_t subject;
  Alteration alteration;
  std::uint64_t index;
};
std::optional<SampleName> parse_sample_name(std::string_view filename);

struct LoadedDataset {
  Dataset dataset;
  std::vector<std::string> warnings;  // one per skipped file
};

// Loads every conforming *.pgm in `dir`, fits each image to
// timesteps*frame_height x frame_width, frames it, and maps sorted subject
// ids onto dense class indices. Samples come out ordered by (subject,
// index, alteration), the order synthgen emits. Throws DataError when
// nothing loads.
LoadedDataset load_dataset_dir(const std::filesystem::path& dir, std::size_t timesteps,
                               std::size_t frame_height, std::size_t frame_width);

}  // namespace clfp
