#include "clfp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <tuple>

#include "clfp/errors.hpp"
#include "clfp/rng.hpp"

namespace clfp {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

// Header token reader: skips whitespace and '#' comments up to end of line.
class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t number(const char* what) {
    skip();
    const char* first = bytes_.data() + pos_;
    const char* last = bytes_.data() + bytes_.size();
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) {
      throw FormatError(std::string("pgm: bad or missing ") + what);
    }
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) {
      throw FormatError("pgm: missing whitespace after maxval");
    }
    return pos_ + 1;
  }

 private:
  void skip() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 2;  // past the magic
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

template <typename Int>
std::optional<Int> parse_uint(std::string_view s) {
  if (s.empty()) return std::nullopt;
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::string_view alteration_tag(Alteration a) {
  switch (a) {
    case Alteration::none: return "none";
    case Alteration::obliteration: return "obl";
    case Alteration::zcut: return "zcut";
    case Alteration::central_rotation: return "crot";
  }
  return "none";
}

std::optional<Alteration> parse_alteration_tag(std::string_view tag) {
  if (tag == "none") return Alteration::none;
  if (tag == "obl") return Alteration::obliteration;
  if (tag == "zcut") return Alteration::zcut;
  if (tag == "crot") return Alteration::central_rotation;
  return std::nullopt;
}

void Dataset::validate() const {
  if (num_classes < 1) throw DataError("dataset has no classes");
  std::vector<bool> seen(num_classes, false);
  for (const auto& s : samples) {
    if (s.subject >= num_classes) {
      throw DataError("label " + std::to_string(s.subject) + " out of range for " +
                      std::to_string(num_classes) + " classes");
    }
    seen[s.subject] = true;
  }
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (!seen[k]) throw DataError("class " + std::to_string(k) + " has no samples");
  }
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& s : samples) {
    if (s.subject < num_classes) ++counts[s.subject];
  }
  return counts;
}

Tensor load_image_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("pgm: not a netpbm file");
  if (bytes[1] != '5') {
    throw FormatError(std::string("pgm: unsupported format P") + bytes[1] + " (only binary P5)");
  }
  HeaderReader header(bytes);
  const std::size_t width = header.number("width");
  const std::size_t height = header.number("height");
  const std::size_t maxval = header.number("maxval");
  if (width == 0 || height == 0) throw FormatError("pgm: zero image extent");
  if (maxval != 255) {
    throw FormatError("pgm: maxval " + std::to_string(maxval) + " unsupported (need 255)");
  }
  const std::size_t start = header.raster_start();
  const std::size_t pixels = width * height;
  if (bytes.size() < start || bytes.size() - start < pixels) {
    throw FormatError("pgm: truncated raster, header claims " + std::to_string(pixels) +
                      " pixels, " + std::to_string(bytes.size() - std::min(start, bytes.size())) +
                      " bytes present");
  }
  Tensor img(Shape{height, width, 1});
  for (std::size_t i = 0; i < pixels; ++i) {
    img[i] = static_cast<float>(static_cast<unsigned char>(bytes[start + i]));
  }
  return img;
}

Tensor load_image_pgm_file(const std::filesystem::path& path) {
  return load_image_pgm(read_file(path));
}

std::string encode_pgm(const Tensor& unit_image) {
  if (unit_image.rank() != 3 || unit_image.extent(2) != 1) {
    throw ShapeError("encode_pgm: expected [h, w, 1], got " + unit_image.shape().str());
  }
  std::string out = "P5\n" + std::to_string(unit_image.extent(1)) + " " +
                    std::to_string(unit_image.extent(0)) + "\n255\n";
  out.reserve(out.size() + unit_image.size());
  for (float v : unit_image.values()) {
    const float clamped = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0f))));
  }
  return out;
}

void write_pgm_file(const std::filesystem::path& path, const Tensor& unit_image) {
  const std::string bytes = encode_pgm(unit_image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

Tensor normalize_and_frame(const Tensor& raw_image, std::size_t timesteps) {
  if (raw_image.rank() != 3 || raw_image.extent(2) != 1) {
    throw ShapeError("normalize_and_frame: expected [h, w, 1], got " + raw_image.shape().str());
  }
  const std::size_t h = raw_image.extent(0), w = raw_image.extent(1);
  if (timesteps == 0 || h % timesteps != 0) {
    throw ShapeError("normalize_and_frame: " + std::to_string(timesteps) +
                     " timesteps do not divide image height " + std::to_string(h));
  }
  Tensor framed(Shape{timesteps, h / timesteps, w, 1});
  for (std::size_t i = 0; i < raw_image.size(); ++i) framed[i] = raw_image[i] / 255.0f;
  return framed;
}

Tensor center_fit(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3 || image.extent(2) != 1) {
    throw ShapeError("center_fit: expected [h, w, 1], got " + image.shape().str());
  }
  const std::size_t h = image.extent(0), w = image.extent(1);
  if (h == height && w == width) return image;
  Tensor out(Shape{height, width, 1});
  // Offsets of the source window (crop) or destination window (pad).
  const auto src_y = h > height ? (h - height) / 2 : 0;
  const auto src_x = w > width ? (w - width) / 2 : 0;
  const auto dst_y = height > h ? (height - h) / 2 : 0;
  const auto dst_x = width > w ? (width - w) / 2 : 0;
  const std::size_t rows = std::min(h, height), cols = std::min(w, width);
  for (std::size_t y = 0; y < rows; ++y) {
    for (std::size_t x = 0; x < cols; ++x) {
      out((dst_y + y), (dst_x + x), 0) = image(src_y + y, src_x + x, 0);
    }
  }
  return out;
}

Tensor one_hot_encode(std::size_t label, std::size_t num_classes) {
  if (label >= num_classes) {
    throw DataError("one_hot_encode: label " + std::to_string(label) + " out of range for " +
                    std::to_string(num_classes) + " classes");
  }
  Tensor t(Shape{num_classes});
  t[label] = 1.0f;
  return t;
}

std::size_t validation_count(std::size_t n, double val_fraction) {
  if (n < 2) throw DataError("stratified_split: class with fewer than 2 samples");
  const auto raw = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction + 0.5));
  return std::clamp<std::size_t>(raw, 1, n - 1);
}

Split stratified_split(const Dataset& d, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in (0, 1)");
  }
  d.validate();
  std::vector<std::vector<std::size_t>> by_class(d.num_classes);
  for (std::size_t i = 0; i < d.samples.size(); ++i) by_class[d.samples[i].subject].push_back(i);

  std::vector<bool> to_val(d.samples.size(), false);
  SplitMix64 rng(seed);
  for (std::size_t k = 0; k < d.num_classes; ++k) {
    auto& members = by_class[k];
    if (members.size() < 2) {
      throw DataError("stratified_split: class " + std::to_string(k) + " has " +
                      std::to_string(members.size()) + " sample(s), need >= 2");
    }
    const std::size_t n_val = validation_count(members.size(), val_fraction);
    shuffle(members, rng);
    for (std::size_t j = 0; j < n_val; ++j) to_val[members[j]] = true;
  }

  Split out;
  for (Dataset* part : {&out.train, &out.val}) {
    part->num_classes = d.num_classes;
    part->provenance = d.provenance;
    part->subject_ids = d.subject_ids;
  }
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    (to_val[i] ? out.val : out.train).samples.push_back(d.samples[i]);
  }
  return out;
}

std::optional<SampleName> parse_sample_name(std::string_view filename) {
  constexpr std::string_view ext = ".pgm";
  if (filename.size() <= ext.size() || !filename.ends_with(ext)) return std::nullopt;
  filename.remove_suffix(ext.size());
  const auto first = filename.find("__");
  if (first == std::string_view::npos) return std::nullopt;
  const auto second = filename.find("__", first + 2);
  if (second == std::string_view::npos) return std::nullopt;
  const auto subject = parse_uint<std::uint64_t>(filename.substr(0, first));
  const auto alteration = parse_alteration_tag(filename.substr(first + 2, second - first - 2));
  const auto index = parse_uint<std::uint64_t>(filename.substr(second + 2));
  if (!subject || !alteration || !index) return std::nullopt;
  return SampleName{*subject, *alteration, *index};
}

LoadedDataset load_dataset_dir(const std::filesystem::path& dir, std::size_t timesteps,
                               std::size_t frame_height, std::size_t frame_width) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("data directory not found: " + dir.string());

  LoadedDataset out;
  struct Entry {
    SampleName name;
    fs::path path;
  };
  std::vector<Entry> entries;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (!item.is_regular_file()) continue;
    const std::string filename = item.path().filename().string();
    if (item.path().extension() != ".pgm") continue;
    if (auto name = parse_sample_name(filename)) {
      entries.push_back({*name, item.path()});
    } else {
      out.warnings.push_back("skipping " + filename + ": expected <subject>__<none|obl|zcut|crot>__<index>.pgm");
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.name.subject, a.name.index, a.name.alteration) <
           std::tie(b.name.subject, b.name.index, b.name.alteration);
  });

  std::map<std::uint64_t, std::size_t> class_of;
  for (const auto& e : entries) class_of.emplace(e.name.subject, 0);
  std::size_t next = 0;
  for (auto& [id, cls] : class_of) {
    cls = next++;
    out.dataset.subject_ids.push_back(id);
  }

  const std::size_t height = timesteps * frame_height;
  for (const auto& e : entries) {
    try {
      const Tensor raw = center_fit(load_image_pgm_file(e.path), height, frame_width);
      out.dataset.samples.push_back(
          Sample{class_of.at(e.name.subject), e.name.alteration, normalize_and_frame(raw, timesteps)});
    } catch (const FormatError& err) {
      out.warnings.push_back("skipping " + e.path.filename().string() + ": " + err.what());
    }
  }
  if (out.dataset.samples.empty()) {
    throw DataError("no loadable samples in " + dir.string());
  }

  // Drop ids whose files were all unreadable so classes stay dense.
  std::vector<bool> present(next, false);
  for (const auto& s : out.dataset.samples) present[s.subject] = true;
  std::vector<std::size_t> remap(next, 0);
  std::vector<std::uint64_t> ids;
  std::size_t dense = 0;
  for (std::size_t k = 0; k < next; ++k) {
    if (!present[k]) continue;
    remap[k] = dense++;
    ids.push_back(out.dataset.subject_ids[k]);
  }
  for (auto& s : out.dataset.samples) s.subject = remap[s.subject];
  out.dataset.subject_ids = std::move(ids);
  out.dataset.num_classes = dense;
  out.dataset.provenance = Provenance::external;
  return out;
}

}  // namespace clfp
