#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spincat/experiments.hpp"

namespace spincat {

/// Locale-independent 17-significant-digit rendering, identical bytes per value.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (res.ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, res.ptr);
}

inline std::string format_number(long long v) { return std::to_string(v); }

inline constexpr const char* kCsvHeader =
    "experiment,theta,n,phi,tau,sigma,gamma_ratio,mu,delta_phi,method,flag";

inline std::string rows_to_csv(const std::string& experiment, const std::vector<ScanRow>& rows) {
  std::string out(kCsvHeader);
  out.push_back('\n');
  for (const ScanRow& row : rows) {
    out += experiment;
    out.push_back(',');
    out += format_number(row.theta);
    out.push_back(',');
    out += format_number(row.n);
    out.push_back(',');
    out += format_number(row.phi);
    out.push_back(',');
    out += format_number(row.tau);
    out.push_back(',');
    out += format_number(row.sigma);
    out.push_back(',');
    out += format_number(row.gamma_ratio);
    out.push_back(',');
    out += format_number(row.mu);
    out.push_back(',');
    out += format_number(row.delta_phi);
    out.push_back(',');
    out += row.method;
    out.push_back(',');
    out += row.flag;
    out.push_back('\n');
  }
  return out;
}

inline std::string rows_to_json(const std::string& experiment, const std::vector<ScanRow>& rows) {
  std::string out = "[\n";
  bool first = true;
  for (const ScanRow& row : rows) {
    if (!first) out += ",\n";
    first = false;
    out += "  {\"experiment\":\"" + experiment + "\"";
    out += ",\"theta\":" + format_number(row.theta);
    out += ",\"n\":" + format_number(row.n);
    out += ",\"phi\":" + format_number(row.phi);
    out += ",\"tau\":" + format_number(row.tau);
    out += ",\"sigma\":" + format_number(row.sigma);
    out += ",\"gamma_ratio\":" + format_number(row.gamma_ratio);
    out += ",\"mu\":" + format_number(row.mu);
    out += ",\"delta_phi\":" + (std::isfinite(row.delta_phi) ? format_number(row.delta_phi)
                                                             : std::string("null"));
    out += ",\"method\":\"" + row.method + "\"";
    out += ",\"flag\":\"" + row.flag + "\"}";
  }
  out += "\n]\n";
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream stream(path, std::ios::binary);
  if (!stream) throw std::runtime_error("write_text_file: cannot open " + path);
  stream << content;
  if (!stream) throw std::runtime_error("write_text_file: write failed for " + path);
}

/// A single polyline chart; one series per (theta, gamma) group of a table.
struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

inline std::string svg_plot(const std::vector<SvgSeries>& series, const std::string& x_label,
                            const std::string& y_label, bool log_x, bool log_y) {
  constexpr double width = 720.0, height = 480.0;
  constexpr double left = 70.0, right = 20.0, top = 20.0, bottom = 50.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if ((log_x && x <= 0.0) || (log_y && y <= 0.0)) continue;
      x_min = std::min(x_min, tx(x));
      x_max = std::max(x_max, tx(x));
      y_min = std::min(y_min, ty(y));
      y_max = std::max(y_max, ty(y));
    }
  }
  if (!(x_max > x_min)) x_max = x_min + 1.0;
  if (!(y_max > y_min)) y_max = y_min + 1.0;

  auto px = [&](double v) { return left + (tx(v) - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double v) { return top + (1.0 - (ty(v) - y_min) / (y_max - y_min)) * plot_h; };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 720 480\" "
         "font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect x=\"" + format_number(left) + "\" y=\"" + format_number(top) + "\" width=\"" +
         format_number(plot_w) + "\" height=\"" + format_number(plot_h) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";
  std::size_t color = 0;
  double legend_y = top + 16.0;
  for (const auto& s : series) {
    std::string path;
    bool pen_down = false;
    for (const auto& [x, y] : s.points) {
      const bool ok = std::isfinite(x) && std::isfinite(y) && !(log_x && x <= 0.0) &&
                      !(log_y && y <= 0.0);
      if (!ok) {
        pen_down = false;
        continue;
      }
      path += pen_down ? " L " : " M ";
      path += format_number(px(x)) + " " + format_number(py(y));
      pen_down = true;
    }
    const char* stroke = palette[color % (sizeof(palette) / sizeof(palette[0]))];
    out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"1.5\"/>\n";
    out += "<text x=\"" + format_number(left + 8.0) + "\" y=\"" + format_number(legend_y) +
           "\" fill=\"" + stroke + "\">" + s.label + "</text>\n";
    legend_y += 16.0;
    ++color;
  }
  out += "<text x=\"" + format_number(left + plot_w / 2.0) + "\" y=\"" +
         format_number(height - 12.0) + "\" text-anchor=\"middle\">" + x_label +
         (log_x ? " (log10)" : "") + "</text>\n";
  out += "<text x=\"16\" y=\"" + format_number(top + plot_h / 2.0) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         format_number(top + plot_h / 2.0) + ")\">" + y_label + (log_y ? " (log10)" : "") +
         "</text>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace spincat
