#include "netscan/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "netscan/error.hpp"

namespace netscan::cli {

namespace {

constexpr std::array<const char*, 5> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                              "#ff7f0e"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(double width, double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

double lens_area(double r1, double r2, double d) {
  if (d >= r1 + r2) return 0.0;
  if (d <= std::fabs(r1 - r2)) return std::numbers::pi * std::pow(std::min(r1, r2), 2);
  const double a1 = std::acos(std::clamp((d * d + r1 * r1 - r2 * r2) / (2 * d * r1), -1.0, 1.0));
  const double a2 = std::acos(std::clamp((d * d + r2 * r2 - r1 * r1) / (2 * d * r2), -1.0, 1.0));
  const double k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
  return r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * std::sqrt(std::max(0.0, k));
}

// Centre distance whose lens area matches `shared` (bisection; area is
// monotone decreasing in distance).
double distance_for_overlap(double r1, double r2, double shared) {
  double lo = std::fabs(r1 - r2);
  double hi = r1 + r2;
  if (shared <= 0.0) return hi;
  if (shared >= lens_area(r1, r2, lo)) return lo;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (lens_area(r1, r2, mid) > shared ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::string venn_svg(const OverlapReport& report) {
  const std::size_t k = report.set_labels.size();
  if (k < 2 || k > 3) throw Error("Venn figures support two or three sets");

  std::vector<double> radius(k);
  for (std::size_t i = 0; i < k; ++i) {
    radius[i] = std::sqrt(static_cast<double>(report.set_sizes[i]) / std::numbers::pi);
  }
  auto dist = [&](std::size_t i, std::size_t j) {
    return distance_for_overlap(radius[i], radius[j],
                                static_cast<double>(report.pairwise_intersections[i][j]));
  };
  std::vector<std::array<double, 2>> centre(k, {0.0, 0.0});
  const double d01 = dist(0, 1);
  centre[1] = {d01, 0.0};
  if (k == 3) {
    const double d02 = dist(0, 2);
    const double d12 = dist(1, 2);
    // Law of cosines; clamp when the three distances cannot form a triangle.
    double cos_a = d01 > 0 && d02 > 0 ? (d01 * d01 + d02 * d02 - d12 * d12) / (2 * d01 * d02) : 0.0;
    cos_a = std::clamp(cos_a, -1.0, 1.0);
    centre[2] = {d02 * cos_a, d02 * std::sqrt(1.0 - cos_a * cos_a)};
  }

  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  bool first = true;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = radius[i];
    if (first) {
      min_x = centre[i][0] - r, max_x = centre[i][0] + r;
      min_y = centre[i][1] - r, max_y = centre[i][1] + r;
      first = false;
    }
    min_x = std::min(min_x, centre[i][0] - r);
    max_x = std::max(max_x, centre[i][0] + r);
    min_y = std::min(min_y, centre[i][1] - r);
    max_y = std::max(max_y, centre[i][1] + r);
  }
  const double plot = 300.0;
  const double extent = std::max({max_x - min_x, max_y - min_y, 1e-12});
  const double scale = plot / extent;

  std::string svg = header(560, 340);
  for (std::size_t i = 0; i < k; ++i) {
    const double cx = 20 + (centre[i][0] - min_x) * scale;
    const double cy = 20 + (centre[i][1] - min_y) * scale;
    svg += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" +
           num(radius[i] * scale) + "\" fill=\"" + kPalette[i] +
           "\" fill-opacity=\"0.35\" stroke=\"" + kPalette[i] + "\"/>\n";
  }
  double y = 30;
  for (std::size_t i = 0; i < k; ++i, y += 18) {
    svg += "<rect x=\"340\" y=\"" + num(y - 10) + "\" width=\"12\" height=\"12\" fill=\"" +
           kPalette[i] + "\" fill-opacity=\"0.6\"/>\n";
    svg += "<text x=\"358\" y=\"" + num(y) + "\">" + escape(report.set_labels[i]) + " (" +
           std::to_string(report.set_sizes[i]) + ")</text>\n";
  }
  y += 10;
  for (const auto& [mask, count] : report.region_counts) {
    svg += "<text x=\"340\" y=\"" + num(y) + "\">only " + escape(report.region_name(mask)) +
           ": " + std::to_string(count) + "</text>\n";
    y += 16;
  }
  svg += "</svg>\n";
  return svg;
}

std::string heatmap_svg(const OverlapReport& report) {
  const std::size_t k = report.set_labels.size();
  const double cell = 48.0;
  const double left = 120.0;
  const double top = 120.0;
  std::uint64_t max_value = 1;
  for (const auto& row : report.pairwise_intersections) {
    for (auto v : row) max_value = std::max(max_value, v);
  }
  std::string svg = header(left + cell * k + 20, top + cell * k + 20);
  for (std::size_t i = 0; i < k; ++i) {
    const double pos = (i + 0.5) * cell;
    svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(top + pos + 4) +
           "\" text-anchor=\"end\">" + escape(report.set_labels[i]) + "</text>\n";
    svg += "<text transform=\"translate(" + num(left + pos + 4) + "," + num(top - 6) +
           ") rotate(-60)\">" + escape(report.set_labels[i]) + "</text>\n";
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::uint64_t v = report.pairwise_intersections[i][j];
      const double level = static_cast<double>(v) / static_cast<double>(max_value);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - level)));
      char fill[16];
      std::snprintf(fill, sizeof(fill), "#%02x%02xff", shade, shade);
      const double x = left + j * cell;
      const double yy = top + i * cell;
      svg += "<rect x=\"" + num(x) + "\" y=\"" + num(yy) + "\" width=\"" + num(cell) +
             "\" height=\"" + num(cell) + "\" fill=\"" + fill + "\" stroke=\"#888\"/>\n";
      svg += "<text x=\"" + num(x + cell / 2) + "\" y=\"" + num(yy + cell / 2 + 4) +
             "\" text-anchor=\"middle\" fill=\"" + (level > 0.6 ? "white" : "black") + "\">" +
             std::to_string(v) + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string series_svg(std::span<const float> values, std::span<const double> fitted,
                       const std::string& title) {
  if (values.size() != fitted.size()) throw Error("series and fit lengths differ");
  const double width = 800, height = 300, margin = 40;
  double lo = 0, hi = 1;
  if (!values.empty()) {
    lo = hi = values[0];
    for (float v : values) lo = std::min(lo, double{v}), hi = std::max(hi, double{v});
    for (double v : fitted) lo = std::min(lo, v), hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double n = std::max<double>(1.0, static_cast<double>(values.size()) - 1.0);
  auto px = [&](std::size_t t) { return margin + (width - 2 * margin) * static_cast<double>(t) / n; };
  auto py = [&](double v) { return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo); };

  auto polyline = [&](auto&& at, const char* colour) {
    std::string pts;
    for (std::size_t t = 0; t < values.size(); ++t) {
      if (t > 0) pts += ' ';
      pts += num(px(t)) + "," + num(py(at(t)));
    }
    return "<polyline fill=\"none\" stroke=\"" + std::string(colour) +
           "\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
  };

  std::string svg = header(width, height);
  svg += "<text x=\"" + num(margin) + "\" y=\"20\">" + escape(title) + "</text>\n";
  svg += "<line x1=\"" + num(margin) + "\" y1=\"" + num(height - margin) + "\" x2=\"" +
         num(width - margin) + "\" y2=\"" + num(height - margin) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(margin) + "\" y1=\"" + num(margin) + "\" x2=\"" + num(margin) +
         "\" y2=\"" + num(height - margin) + "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + num(width / 2) + "\" y=\"" + num(height - 8) +
         "\" text-anchor=\"middle\">token</text>\n";
  svg += polyline([&](std::size_t t) { return double{values[t]}; }, "#1f77b4");
  svg += polyline([&](std::size_t t) { return fitted[t]; }, "#d62728");
  svg += "</svg>\n";
  return svg;
}

}  // namespace netscan::cli
