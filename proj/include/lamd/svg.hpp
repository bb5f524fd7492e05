#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "lamd/stats.hpp"

// Minimal SVG plots. The CSV files carry the numbers; these are for eyes only.

namespace lamd {

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors[i % 6];
}

constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 20, kTop = 30, kBottom = 50;

inline std::string frame(const std::string& title, const std::string& xlabel, const std::string& ylabel, double x0,
                         double x1, double y0, double y1) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                  fmt(kWidth) + "\" height=\"" + fmt(kHeight) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(title) +
       "</text>\n";
  const double bottom = kHeight - kBottom, right = kWidth - kRight;
  s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(bottom) + "\" x2=\"" + fmt(right) + "\" y2=\"" + fmt(bottom) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(kLeft) + "\" y2=\"" + fmt(bottom) +
       "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + fmt(kLeft) + "\" y=\"" + fmt(bottom + 16) + "\" font-size=\"11\">" + fmt_tick(x0) + "</text>\n";
  s += "<text x=\"" + fmt(right) + "\" y=\"" + fmt(bottom + 16) + "\" font-size=\"11\" text-anchor=\"end\">" +
       fmt_tick(x1) + "</text>\n";
  s += "<text x=\"" + fmt(kLeft - 4) + "\" y=\"" + fmt(bottom) + "\" font-size=\"11\" text-anchor=\"end\">" +
       fmt_tick(y0) + "</text>\n";
  s += "<text x=\"" + fmt(kLeft - 4) + "\" y=\"" + fmt(kTop + 10) + "\" font-size=\"11\" text-anchor=\"end\">" +
       fmt_tick(y1) + "</text>\n";
  s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"" + fmt(kHeight - 12) + "\" text-anchor=\"middle\" font-size=\"12\">" +
       xml_escape(xlabel) + "</text>\n";
  s += "<text x=\"14\" y=\"" + fmt(kHeight / 2) + "\" font-size=\"12\" transform=\"rotate(-90 14 " +
       fmt(kHeight / 2) + ")\" text-anchor=\"middle\">" + xml_escape(ylabel) + "</text>\n";
  return s;
}

inline std::string legend(const std::vector<std::string>& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kTop + 14.0 * static_cast<double>(i) + 4;
    s += "<rect x=\"" + fmt(kWidth - kRight - 130) + "\" y=\"" + fmt(y) + "\" width=\"10\" height=\"10\" fill=\"" +
         palette(i) + "\"/>\n";
    s += "<text x=\"" + fmt(kWidth - kRight - 115) + "\" y=\"" + fmt(y + 9) + "\" font-size=\"11\">" +
         xml_escape(labels[i]) + "</text>\n";
  }
  return s;
}

}  // namespace detail

/// Overlaid step outlines, one per label.
inline std::string histogram_svg(const Histogram& h, const std::string& title) {
  using namespace detail;
  std::size_t peak = 1;
  for (const auto& [label, c] : h.counts) peak = std::max(peak, *std::max_element(c.begin(), c.end()));
  const double x0 = h.bin_edges.front(), x1 = h.bin_edges.back();
  std::string s = frame(title, "recovery error (MSE)", "count", x0, x1, 0.0, static_cast<double>(peak));
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kHeight - kBottom - y / static_cast<double>(peak) * ph; };
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const auto& [label, c] = h.counts[k];
    labels.push_back(label);
    std::string pts = fmt(px(x0)) + "," + fmt(py(0));
    for (std::size_t b = 0; b < c.size(); ++b) {
      const double y = py(static_cast<double>(c[b]));
      pts += " " + fmt(px(h.bin_edges[b])) + "," + fmt(y) + " " + fmt(px(h.bin_edges[b + 1])) + "," + fmt(y);
    }
    pts += " " + fmt(px(x1)) + "," + fmt(py(0));
    s += "<polyline fill=\"none\" stroke=\"" + std::string(palette(k)) + "\" stroke-width=\"1.5\" points=\"" + pts +
         "\"/>\n";
  }
  return s + legend(labels) + "</svg>\n";
}

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Line plot; with log_y the y axis is log10 and non-positive values are dropped.
inline std::string line_plot_svg(const std::vector<Series>& series, const std::string& title,
                                 const std::string& xlabel, const std::string& ylabel, bool log_y = false) {
  using namespace detail;
  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (log_y && !(y > 0)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, ty(y));
      y1 = std::max(y1, ty(y));
    }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  std::string out = frame(title, xlabel, log_y ? "log10 " + ylabel : ylabel, x0, x1, y0, y1);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < series.size(); ++k) {
    labels.push_back(series[k].label);
    std::string pts;
    for (const auto& [x, y] : series[k].points) {
      if (log_y && !(y > 0)) continue;
      pts += fmt(kLeft + (x - x0) / (x1 - x0) * pw) + "," + fmt(kHeight - kBottom - (ty(y) - y0) / (y1 - y0) * ph) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(palette(k)) + "\" stroke-width=\"1.5\" points=\"" + pts +
           "\"/>\n";
  }
  return out + legend(labels) + "</svg>\n";
}

}  // namespace lamd
