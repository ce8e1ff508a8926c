#include "cli/curves.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace clfp::cli {

namespace {

constexpr double kWidth = 640;
constexpr double kChartHeight = 220;
constexpr double kLeft = 64, kRight = 24, kTop = 32, kBottom = 40;

struct Metric {
  const char* name;
  double EpochRecord::*field;
};

constexpr std::array<Metric, 5> kMetrics = {{{"loss", &EpochRecord::loss},
                                             {"accuracy", &EpochRecord::accuracy},
                                             {"precision", &EpochRecord::precision},
                                             {"recall", &EpochRecord::recall},
                                             {"auc", &EpochRecord::auc}}};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// Roughly five round-numbered steps across [0, span].
double tick_step(double span) {
  if (span <= 0) return 1;
  const double raw = span / 5;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10 * mag;
}

void chart(std::string& svg, const TrainLog& log, const Metric& metric, double y0) {
  std::size_t last_epoch = 1;
  double lo = 0, hi = 1;
  for (const auto& r : log.records) {
    last_epoch = std::max(last_epoch, r.epoch);
    hi = std::max(hi, r.*metric.field);
    lo = std::min(lo, r.*metric.field);
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kChartHeight - kTop - kBottom;
  const double x_span = last_epoch > 1 ? static_cast<double>(last_epoch - 1) : 1.0;
  auto px = [&](double epoch) { return kLeft + (epoch - 1) / x_span * plot_w; };
  auto py = [&](double v) { return y0 + kTop + (hi - v) / (hi - lo) * plot_h; };

  svg += "<g class=\"chart\" id=\"" + std::string(metric.name) + "\">\n";
  svg += "<text x=\"" + fmt("%.1f", kWidth / 2) + "\" y=\"" + fmt("%.1f", y0 + 20) +
         "\" text-anchor=\"middle\" font-weight=\"bold\">" + metric.name + "</text>\n";
  svg += "<rect x=\"" + fmt("%.1f", kLeft) + "\" y=\"" + fmt("%.1f", y0 + kTop) + "\" width=\"" +
         fmt("%.1f", plot_w) + "\" height=\"" + fmt("%.1f", plot_h) +
         "\" fill=\"none\" stroke=\"#888\"/>\n";

  const double ys = tick_step(hi - lo);
  for (double v = std::ceil(lo / ys) * ys; v <= hi + 1e-9; v += ys) {
    svg += "<line x1=\"" + fmt("%.1f", kLeft - 4) + "\" x2=\"" + fmt("%.1f", kLeft) + "\" y1=\"" +
           fmt("%.1f", py(v)) + "\" y2=\"" + fmt("%.1f", py(v)) + "\" stroke=\"#888\"/>\n";
    svg += "<text x=\"" + fmt("%.1f", kLeft - 6) + "\" y=\"" + fmt("%.1f", py(v) + 4) +
           "\" text-anchor=\"end\">" + fmt("%g", v) + "</text>\n";
  }
  const double xs = std::max(1.0, std::round(tick_step(x_span)));
  for (double e = 1; e <= static_cast<double>(last_epoch) + 1e-9; e += xs) {
    svg += "<line x1=\"" + fmt("%.1f", px(e)) + "\" x2=\"" + fmt("%.1f", px(e)) + "\" y1=\"" +
           fmt("%.1f", y0 + kTop + plot_h) + "\" y2=\"" + fmt("%.1f", y0 + kTop + plot_h + 4) +
           "\" stroke=\"#888\"/>\n";
    svg += "<text x=\"" + fmt("%.1f", px(e)) + "\" y=\"" + fmt("%.1f", y0 + kTop + plot_h + 16) +
           "\" text-anchor=\"middle\">" + fmt("%g", e) + "</text>\n";
  }
  svg += "<text x=\"" + fmt("%.1f", kLeft + plot_w / 2) + "\" y=\"" +
         fmt("%.1f", y0 + kChartHeight - 4) + "\" text-anchor=\"middle\">epoch</text>\n";
  svg += "<text transform=\"translate(14," + fmt("%.1f", y0 + kTop + plot_h / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + metric.name + "</text>\n";

  for (auto [split, color] : {std::pair{SplitKind::train, "#1f77b4"}, std::pair{SplitKind::val, "#ff7f0e"}}) {
    std::string points;
    for (const auto& r : log.records) {
      if (r.split != split) continue;
      points += fmt("%.2f", px(static_cast<double>(r.epoch))) + "," + fmt("%.2f", py(r.*metric.field)) + " ";
    }
    svg += "<polyline class=\"" + std::string(to_string(split)) + "\" fill=\"none\" stroke=\"" +
           color + "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
  }
  svg += "</g>\n";
}

}  // namespace

std::string render_curves_svg(const TrainLog& log) {
  const double height = kChartHeight * kMetrics.size() + 30;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kWidth) +
                    "\" height=\"" + fmt("%.0f", height) +
                    "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt("%.1f", kWidth - kRight - 90) +
         "\" y=\"18\" fill=\"#1f77b4\">train</text>\n";
  svg += "<text x=\"" + fmt("%.1f", kWidth - kRight - 40) + "\" y=\"18\" fill=\"#ff7f0e\">val</text>\n";
  for (std::size_t i = 0; i < kMetrics.size(); ++i) {
    chart(svg, log, kMetrics[i], 24 + kChartHeight * static_cast<double>(i));
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace clfp::cli
