#include "clfp/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "clfp/errors.hpp"
#include "clfp/rng.hpp"

namespace clfp {

namespace {

constexpr double kPi = std::numbers::pi;

// Per-subject ridge field. The ridge phase is
//   u(p) = p . d0 + sum_k b_k sin(2 pi nu_k (p . d_k) / side + psi_k) + gamma |p - core|
// and the image is a sharpened sinusoid of 2 pi f u(p).
struct RidgeField {
  double frequency;
  double dir_x, dir_y;
  std::array<double, 3> amp, nu, wave_x, wave_y, psi;
  double gamma;
  double core_x, core_y;
  double phase;

  double u(double x, double y, double side) const {
    double v = x * dir_x + y * dir_y;
    for (std::size_t k = 0; k < amp.size(); ++k) {
      v += amp[k] * std::sin(2.0 * kPi * nu[k] * (x * wave_x[k] + y * wave_y[k]) / side + psi[k]);
    }
    v += gamma * std::hypot(x - core_x, y - core_y);
    return v;
  }
};

RidgeField subject_field(std::size_t subject, const GenConfig& cfg) {
  SplitMix64 rng(derive_seed(cfg.seed, {0x5b1ec7ULL, subject}));
  const double side = static_cast<double>(std::min(cfg.height, cfg.width));
  RidgeField f{};
  f.frequency = rng.uniform(cfg.freq_min, cfg.freq_max);
  const double theta = rng.uniform(0.0, kPi);
  f.dir_x = std::cos(theta);
  f.dir_y = std::sin(theta);
  for (std::size_t k = 0; k < f.amp.size(); ++k) {
    f.nu[k] = rng.uniform(0.5, 1.5);
    // Each bend tilts the local ridge normal by at most ~0.25 rad.
    f.amp[k] = rng.uniform(0.10, 0.25) * side / (2.0 * kPi * f.nu[k]);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    f.wave_x[k] = std::cos(phi);
    f.wave_y[k] = std::sin(phi);
    f.psi[k] = rng.uniform(0.0, 2.0 * kPi);
  }
  f.gamma = rng.uniform(0.2, 0.5);
  f.core_x = rng.uniform(-0.2, 0.2) * side;
  f.core_y = rng.uniform(-0.2, 0.2) * side;
  f.phase = rng.uniform(0.0, 2.0 * kPi);
  return f;
}

std::uint64_t alteration_code(Alteration a) { return static_cast<std::uint64_t>(a) + 1; }

struct Disc {
  double cy, cx, r;
  bool contains(std::size_t y, std::size_t x) const {
    const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
    return dy * dy + dx * dx <= r * r;
  }
};

Disc obliteration_disc(std::size_t h, std::size_t w, const AlterationParams& p, std::uint64_t seed) {
  const auto side = std::min(h, w);
  const auto r = static_cast<std::size_t>(std::lround(p.obliteration_radius * static_cast<double>(side)));
  if (p.obliteration_radius <= 0.0 || r == 0 || 2 * r + 1 > side) {
    throw ConfigError("obliteration radius " + std::to_string(p.obliteration_radius) +
                      " does not fit a " + std::to_string(h) + "x" + std::to_string(w) + " image");
  }
  SplitMix64 rng(derive_seed(seed, {0x0b1ULL}));
  const std::size_t cy = r + rng.below(h - 2 * r);
  const std::size_t cx = r + rng.below(w - 2 * r);
  return {static_cast<double>(cy), static_cast<double>(cx), static_cast<double>(r)};
}

Disc rotation_disc(std::size_t h, std::size_t w, const AlterationParams& p) {
  const double side = static_cast<double>(std::min(h, w));
  const double r = p.rotation_radius * side;
  if (p.rotation_radius <= 0.0 || r > (side - 1.0) / 2.0) {
    throw ConfigError("rotation radius " + std::to_string(p.rotation_radius) +
                      " does not fit a " + std::to_string(h) + "x" + std::to_string(w) + " image");
  }
  return {(static_cast<double>(h) - 1.0) / 2.0, (static_cast<double>(w) - 1.0) / 2.0, r};
}

// Square box of the Z and its top-left corner.
struct ZBox {
  std::size_t y0, x0, size, stroke;
};

ZBox zcut_box(std::size_t h, std::size_t w, const AlterationParams& p, std::uint64_t seed) {
  const auto side = std::min(h, w);
  const auto size = static_cast<std::size_t>(std::lround(p.zcut_size * static_cast<double>(side)));
  if (p.zcut_width == 0 || size > side || size < 3 * p.zcut_width) {
    throw ConfigError("z-cut of width " + std::to_string(p.zcut_width) + " in a box of " +
                      std::to_string(size) + " px does not fit a " + std::to_string(h) + "x" +
                      std::to_string(w) + " image");
  }
  SplitMix64 rng(derive_seed(seed, {0x2c07ULL}));
  return {rng.below(h - size + 1), rng.below(w - size + 1), size, p.zcut_width};
}

bool on_zcut(const ZBox& z, std::size_t y, std::size_t x) {
  if (y < z.y0 || x < z.x0 || y >= z.y0 + z.size || x >= z.x0 + z.size) return false;
  const double ly = static_cast<double>(y - z.y0), lx = static_cast<double>(x - z.x0);
  const double s = static_cast<double>(z.size), wd = static_cast<double>(z.stroke);
  if (ly < wd || ly >= s - wd) return true;
  // Diagonal from the top-right to the bottom-left corner.
  const double ax = s - 1.0, ay = 0.0, bx = 0.0, by = s - 1.0;
  const double dx = bx - ax, dy = by - ay;
  const double t = std::clamp(((lx - ax) * dx + (ly - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
  return std::hypot(lx - (ax + t * dx), ly - (ay + t * dy)) <= wd / 2.0;
}

float bilinear(const Tensor& img, double y, double x) {
  const std::size_t h = img.extent(0), w = img.extent(1);
  const double fy = std::floor(y), fx = std::floor(x);
  const double ty = y - fy, tx = x - fx;
  auto at = [&](double yy, double xx) {
    const auto iy = static_cast<std::size_t>(std::clamp(yy, 0.0, static_cast<double>(h - 1)));
    const auto ix = static_cast<std::size_t>(std::clamp(xx, 0.0, static_cast<double>(w - 1)));
    return static_cast<double>(img(iy, ix, 0));
  };
  const double top = (1.0 - tx) * at(fy, fx) + tx * at(fy, fx + 1.0);
  const double bottom = (1.0 - tx) * at(fy + 1.0, fx) + tx * at(fy + 1.0, fx + 1.0);
  if (ty == 0.0) return static_cast<float>(tx == 0.0 ? at(fy, fx) : top);
  return static_cast<float>((1.0 - ty) * top + ty * bottom);
}

void check_image(const Tensor& image) {
  if (image.rank() != 3 || image.extent(2) != 1) {
    throw ShapeError("apply_alteration: expected [h, w, 1], got " + image.shape().str());
  }
}

float quantize(float v) {
  return static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
}

}  // namespace

void GenConfig::validate() const {
  if (num_subjects < 2) throw ConfigError("num_subjects must be >= 2");
  if (impressions_per_subject < 1) throw ConfigError("impressions_per_subject must be >= 1");
  if (height < 8 || width < 8) throw ConfigError("image must be at least 8x8");
  if (!(freq_min > 0.0 && freq_min <= freq_max && freq_max < 0.5)) {
    throw ConfigError("ridge frequency range must satisfy 0 < min <= max < 0.5");
  }
  if (!(noise >= 0.0)) throw ConfigError("noise amplitude must be >= 0");
}

Tensor generate_fingerprint(std::size_t subject, std::size_t impression, const GenConfig& cfg) {
  cfg.validate();
  if (subject >= cfg.num_subjects || impression >= cfg.impressions_per_subject) {
    throw ConfigError("generate_fingerprint: subject " + std::to_string(subject) +
                      " / impression " + std::to_string(impression) + " out of range");
  }
  const RidgeField field = subject_field(subject, cfg);
  SplitMix64 rng(derive_seed(cfg.seed, {0x1a9e55ULL, subject, impression}));
  const double angle = rng.uniform(-3.0, 3.0) * kPi / 180.0;
  // Translation uniform in a disc of radius 2 px.
  const double shift = 2.0 * std::sqrt(rng.uniform()), heading = rng.uniform(0.0, 2.0 * kPi);
  const double ty = shift * std::sin(heading), tx = shift * std::cos(heading);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double side = static_cast<double>(std::min(cfg.height, cfg.width));
  const double cy = (static_cast<double>(cfg.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(cfg.width) - 1.0) / 2.0;

  Tensor img(Shape{cfg.height, cfg.width, 1});
  for (std::size_t y = 0; y < cfg.height; ++y) {
    for (std::size_t x = 0; x < cfg.width; ++x) {
      const double py = static_cast<double>(y) - cy, px = static_cast<double>(x) - cx;
      const double qx = ca * px - sa * py + tx;
      const double qy = sa * px + ca * py + ty;
      const double s = std::sin(2.0 * kPi * field.frequency * field.u(qx, qy, side) + field.phase);
      const double v = 0.5 + 0.5 * std::tanh(3.0 * s) + rng.uniform(-cfg.noise, cfg.noise);
      img(y, x, 0) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return img;
}

std::vector<std::uint8_t> alteration_region(std::size_t height, std::size_t width,
                                            Alteration kind, const AlterationParams& params,
                                            std::uint64_t seed) {
  std::vector<std::uint8_t> mask(height * width, 0);
  switch (kind) {
    case Alteration::none:
      break;
    case Alteration::obliteration: {
      const Disc d = obliteration_disc(height, width, params, seed);
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) mask[y * width + x] = d.contains(y, x);
      break;
    }
    case Alteration::zcut: {
      const ZBox z = zcut_box(height, width, params, seed);
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) mask[y * width + x] = on_zcut(z, y, x);
      break;
    }
    case Alteration::central_rotation: {
      const Disc d = rotation_disc(height, width, params);
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) mask[y * width + x] = d.contains(y, x);
      break;
    }
  }
  return mask;
}

Tensor apply_alteration(const Tensor& image, Alteration kind, const AlterationParams& params,
                        std::uint64_t seed) {
  check_image(image);
  const std::size_t h = image.extent(0), w = image.extent(1);
  const auto region = alteration_region(h, w, kind, params, seed);
  Tensor out = image;
  switch (kind) {
    case Alteration::none:
      break;
    case Alteration::obliteration: {
      SplitMix64 rng(derive_seed(seed, {0x0b1ULL, 1}));
      for (std::size_t i = 0; i < region.size(); ++i) {
        if (region[i]) out[i] = static_cast<float>(rng.uniform(0.4, 0.6));
      }
      break;
    }
    case Alteration::zcut:
      for (std::size_t i = 0; i < region.size(); ++i) {
        if (region[i]) out[i] = 1.0f;
      }
      break;
    case Alteration::central_rotation: {
      const Disc d = rotation_disc(h, w, params);
      const double a = params.rotation_degrees * kPi / 180.0;
      // Output pixel p samples the source at R(-a)(p - c) + c.
      const double ca = std::cos(a), sa = std::sin(a);
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          if (!region[y * w + x]) continue;
          const double dy = static_cast<double>(y) - d.cy, dx = static_cast<double>(x) - d.cx;
          const double sx = ca * dx + sa * dy + d.cx;
          const double sy = -sa * dx + ca * dy + d.cy;
          out(y, x, 0) = bilinear(image, sy, sx);
        }
      }
      break;
    }
  }
  return out;
}

std::vector<SyntheticItem> plan_items(const GenConfig& cfg, Layout layout) {
  constexpr std::array kinds{Alteration::none, Alteration::obliteration, Alteration::zcut,
                             Alteration::central_rotation};
  std::vector<SyntheticItem> items;
  for (std::size_t s = 0; s < cfg.num_subjects; ++s) {
    for (std::size_t i = 0; i < cfg.impressions_per_subject; ++i) {
      if (layout == Layout::all) {
        for (Alteration a : kinds) items.push_back({s, i, a});
      } else {
        items.push_back({s, i, kinds[i % kinds.size()]});
      }
    }
  }
  return items;
}

Tensor render_item(const SyntheticItem& item, const GenConfig& cfg, const AlterationParams& params) {
  Tensor img = generate_fingerprint(item.subject, item.impression, cfg);
  const std::uint64_t seed =
      derive_seed(cfg.seed, {0xa17eULL, item.subject, item.impression, alteration_code(item.alteration)});
  img = apply_alteration(img, item.alteration, params, seed);
  for (float& v : img.values()) v = quantize(v);
  return img;
}

Dataset generate_dataset(const GenConfig& cfg, const AlterationParams& params, Layout layout,
                         std::size_t timesteps) {
  cfg.validate();
  Dataset d;
  d.num_classes = cfg.num_subjects;
  d.provenance = Provenance::synthetic;
  for (std::size_t s = 0; s < cfg.num_subjects; ++s) d.subject_ids.push_back(s);
  for (const auto& item : plan_items(cfg, layout)) {
    Tensor img = render_item(item, cfg, params);
    for (float& v : img.values()) v = std::round(v * 255.0f);
    d.samples.push_back(Sample{item.subject, item.alteration, normalize_and_frame(img, timesteps)});
  }
  return d;
}

std::vector<ManifestRow> write_dataset(const GenConfig& cfg, const AlterationParams& params,
                                       Layout layout, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<ManifestRow> rows;
  for (const auto& item : plan_items(cfg, layout)) {
    const std::string name = std::to_string(item.subject) + "__" +
                             std::string(alteration_tag(item.alteration)) + "__" +
                             std::to_string(item.impression) + ".pgm";
    write_pgm_file(out_dir / name, render_item(item, cfg, params));
    rows.push_back({item.subject, item.alteration, item.impression, name});
  }

  std::ofstream manifest(out_dir / "manifest.csv", std::ios::trunc);
  if (!manifest) throw Error("cannot write " + (out_dir / "manifest.csv").string());
  manifest << "subject,alteration,impression,path\n";
  for (const auto& r : rows) {
    manifest << r.subject << ',' << alteration_tag(r.alteration) << ',' << r.impression << ','
             << r.path << '\n';
  }
  if (!manifest) throw Error("short write to manifest.csv");
  return rows;
}

}  // namespace clfp
