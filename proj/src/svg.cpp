// src/svg.cpp

// Copyright 2026  trace2lr authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "trace2lr/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "trace2lr/common.hpp"
#include "trace2lr/time.hpp"

namespace trace2lr::svg {

namespace {

std::string fmt(double v, int decimals = 2) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string escape_text(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Frame {
  int width, height;
  double left = 62, right = 16, top = 34, bottom = 48;
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;

  double px(double x) const {
    return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right);
  }
  double py(double y) const {
    return height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom);
  }
};

std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / std::max(target - 1, 1);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * m >= raw) {
      step = mag * m;
      break;
    }
  }
  std::vector<double> ticks;
  double t = std::ceil(lo / step) * step;
  for (; t <= hi + step * 1e-9; t += step) ticks.push_back(t == 0 ? 0.0 : t);
  return ticks;
}

class Doc {
 public:
  Doc(int w, int h) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
         << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out_ << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0, const std::string& dash = "") {
    out_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
         << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
         << fmt(width, 1) << "\"";
    if (!dash.empty()) out_ << " stroke-dasharray=\"" << dash << "\"";
    out_ << "/>\n";
  }

  void polyline(const std::vector<std::array<double, 2>>& pts, const std::string& stroke,
                double width = 1.5, const std::string& dash = "") {
    out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(width, 1)
         << "\"";
    if (!dash.empty()) out_ << " stroke-dasharray=\"" << dash << "\"";
    out_ << " points=\"";
    for (const auto& p : pts) out_ << fmt(p[0]) << "," << fmt(p[1]) << " ";
    out_ << "\"/>\n";
  }

  void circle(double x, double y, double r, const std::string& fill) {
    out_ << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(r, 1)
         << "\" fill=\"" << fill << "\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "", double opacity = 1.0) {
    out_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
         << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\"";
    if (opacity < 1.0) out_ << " fill-opacity=\"" << fmt(opacity) << "\"";
    if (!stroke.empty()) out_ << " stroke=\"" << stroke << "\" stroke-width=\"0.5\"";
    out_ << "/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 11,
            const std::string& anchor = "start", const std::string& fill = "#333",
            const std::string& transform = "") {
    out_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size
         << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\"" << fill
         << "\"";
    if (!transform.empty()) out_ << " transform=\"" << transform << "\"";
    out_ << ">" << escape_text(s) << "</text>\n";
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

void draw_frame(Doc& doc, const Frame& fr, const PlotStyle& style) {
  doc.line(fr.left, fr.height - fr.bottom, fr.width - fr.right, fr.height - fr.bottom, "#333");
  doc.line(fr.left, fr.top, fr.left, fr.height - fr.bottom, "#333");
  for (double t : nice_ticks(fr.x_lo, fr.x_hi)) {
    const double x = fr.px(t);
    doc.line(x, fr.height - fr.bottom, x, fr.height - fr.bottom + 4, "#333");
    doc.text(x, fr.height - fr.bottom + 16, fmt(t, std::abs(t) < 10 ? 2 : 0), 10, "middle");
  }
  for (double t : nice_ticks(fr.y_lo, fr.y_hi)) {
    const double y = fr.py(t);
    doc.line(fr.left - 4, y, fr.left, y, "#333");
    doc.text(fr.left - 7, y + 3, fmt(t, std::abs(t) < 10 ? 2 : 0), 10, "end");
  }
  if (!style.title.empty()) doc.text(fr.width / 2.0, 20, style.title, 13, "middle");
  if (!style.xlabel.empty())
    doc.text((fr.left + fr.width - fr.right) / 2.0, fr.height - 10, style.xlabel, 11, "middle");
  if (!style.ylabel.empty())
    doc.text(14, (fr.top + fr.height - fr.bottom) / 2.0, style.ylabel, 11, "middle", "#333",
             "rotate(-90 14 " + fmt((fr.top + fr.height - fr.bottom) / 2.0) + ")");
}

void series_extent(const CurveData& curve, double& x_lo, double& x_hi, double& y_lo,
                   double& y_hi) {
  x_lo = y_lo = std::numeric_limits<double>::infinity();
  x_hi = y_hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : curve.series) {
    for (const auto& p : s.points) {
      x_lo = std::min(x_lo, p[0]);
      x_hi = std::max(x_hi, p[0]);
      y_lo = std::min(y_lo, p[1]);
      y_hi = std::max(y_hi, p[1]);
    }
  }
  if (!(x_hi > x_lo)) x_hi = x_lo + 1;
  if (!(y_hi > y_lo)) y_hi = y_lo + 1;
}

}  // namespace

std::string render_curve(const CurveData& curve, const PlotStyle& style) {
  if (curve.series.empty() || curve.series.front().points.empty())
    throw ValidationError("render_curve: empty curve");
  Doc doc(style.width, style.height);
  Frame fr;
  fr.width = style.width;
  fr.height = style.height;
  series_extent(curve, fr.x_lo, fr.x_hi, fr.y_lo, fr.y_hi);
  if (curve.kind == CurveKind::tippett) {
    fr.y_lo = 0;
    fr.y_hi = 1;
  }
  if (curve.kind == CurveKind::ece) fr.y_lo = 0;
  draw_frame(doc, fr, style);

  int color = 0;
  double legend_y = fr.top + 8;
  for (const auto& s : curve.series) {
    const bool is_ref = s.name == "reference";
    const std::string stroke = is_ref ? "#888" : kPalette[color % 10];
    const std::string dash = is_ref ? (curve.kind == CurveKind::ece ? "2,3" : "4,3") : "";
    std::vector<std::array<double, 2>> pts;
    if (curve.kind == CurveKind::tippett) {
      // Step rendering: hold each fraction until the next threshold.
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        if (i) pts.push_back({fr.px(s.points[i][0]), fr.py(s.points[i - 1][1])});
        pts.push_back({fr.px(s.points[i][0]), fr.py(s.points[i][1])});
      }
    } else {
      for (const auto& p : s.points) pts.push_back({fr.px(p[0]), fr.py(p[1])});
    }
    if (curve.kind == CurveKind::pav && !is_ref) {
      for (const auto& p : pts) doc.circle(p[0], p[1], 2.4, kPalette[color % 10]);
    } else {
      doc.polyline(pts, stroke, is_ref ? 1.0 : 1.6, dash);
    }
    doc.line(fr.width - fr.right - 78, legend_y, fr.width - fr.right - 58, legend_y, stroke, 1.6,
             dash);
    doc.text(fr.width - fr.right - 54, legend_y + 3, s.name, 10);
    legend_y += 14;
    if (!is_ref) ++color;
  }
  if (curve.kind == CurveKind::tippett) {
    const double x0 = fr.px(std::max(fr.x_lo, std::min(0.0, fr.x_hi)));
    doc.line(x0, fr.top, x0, fr.height - fr.bottom, "#bbb", 1.0, "2,3");
  }
  return doc.finish();
}

namespace {

/// White-to-colored ramp; darker = lower (better) value, matching the
/// darker-is-better reading of the pairwise figure.
std::string ramp(double v, double v_lo, double v_hi, int base_r, int base_g, int base_b) {
  double t = (v - v_lo) / (v_hi > v_lo ? v_hi - v_lo : 1.0);
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(base_r + (255 - base_r) * t);
  const int g = static_cast<int>(base_g + (255 - base_g) * t);
  const int b = static_cast<int>(base_b + (255 - base_b) * t);
  char buf[10];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string render_heatmap(const PairwiseMatrixReport& report, const PlotStyle& style) {
  const int k = static_cast<int>(report.activities.size());
  if (k == 0) throw ValidationError("render_heatmap: empty report");
  const double label_w = 110, label_h = 90, top = 30;
  const double cell = std::max(
      14.0, std::min((style.width - label_w - 10.0) / k, (style.height - label_h - top) / k));
  const int width = static_cast<int>(label_w + cell * k + 10);
  const int height = static_cast<int>(top + cell * k + label_h);
  Doc doc(width, height);
  if (!style.title.empty()) doc.text(width / 2.0, 18, style.title, 13, "middle");

  double v_lo = std::numeric_limits<double>::infinity(), v_hi = 0;
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c)
      if (r != c && !std::isnan(report.cells(r, c))) {
        v_lo = std::min(v_lo, report.cells(r, c));
        v_hi = std::max(v_hi, report.cells(r, c));
      }
  if (!std::isfinite(v_lo)) v_lo = 0;
  if (!(v_hi > v_lo)) v_hi = v_lo + 1;

  for (int r = 0; r < k; ++r) {
    doc.text(label_w - 4, top + cell * r + cell / 2 + 3, report.activities[static_cast<std::size_t>(r)],
             9, "end");
    const double cx = label_w + cell * r + cell / 2;
    doc.text(cx, top + cell * k + 10, report.activities[static_cast<std::size_t>(r)], 9, "end",
             "#333", "rotate(-60 " + fmt(cx) + " " + fmt(top + cell * k + 10) + ")");
    for (int c = 0; c < k; ++c) {
      const double x = label_w + cell * c, y = top + cell * r;
      std::string fill = "#f4f4f4";
      std::string label;
      if (r == c) {
        if (!std::isnan(report.diagonal[r])) {
          fill = ramp(report.diagonal[r], v_lo, v_hi, 0x2c, 0xa0, 0x2c);
          label = fmt(report.diagonal[r]);
        }
      } else if (!std::isnan(report.cells(r, c))) {
        // Lower triangle: Cllr (orange ramp); upper: Cllr_min (blue ramp).
        fill = r > c ? ramp(report.cells(r, c), v_lo, v_hi, 0xd9, 0x6b, 0x1c)
                     : ramp(report.cells(r, c), v_lo, v_hi, 0x1f, 0x77, 0xb4);
        label = fmt(report.cells(r, c));
      }
      doc.rect(x, y, cell, cell, fill, "#ccc");
      if (!label.empty() && cell >= 22)
        doc.text(x + cell / 2, y + cell / 2 + 3, label, 8, "middle");
    }
  }
  return doc.finish();
}

std::string render_importance(const ImportanceReport& report, const PlotStyle& style) {
  const int rows = static_cast<int>(report.activities.size());
  const int cols = static_cast<int>(report.variables.size());
  if (rows == 0 || cols == 0) throw ValidationError("render_importance: empty report");
  const double label_w = 110, label_h = 100, top = 30;
  const double cw = std::max(10.0, (style.width - label_w - 10.0) / cols);
  const double ch = std::max(12.0, (style.height - top - label_h) / rows);
  const int width = static_cast<int>(label_w + cw * cols + 10);
  const int height = static_cast<int>(top + ch * rows + label_h);
  Doc doc(width, height);
  if (!style.title.empty()) doc.text(width / 2.0, 18, style.title, 13, "middle");
  for (int r = 0; r < rows; ++r) {
    doc.text(label_w - 4, top + ch * r + ch / 2 + 3, report.activities[static_cast<std::size_t>(r)],
             9, "end");
    for (int c = 0; c < cols; ++c) {
      const double v = report.values(r, c);
      doc.rect(label_w + cw * c, top + ch * r, cw, ch, ramp(1.0 - v, 0.0, 1.0, 0x1f, 0x77, 0xb4),
               "#ddd");
    }
  }
  for (int c = 0; c < cols; ++c) {
    const double cx = label_w + cw * c + cw / 2;
    doc.text(cx, top + ch * rows + 10, report.variables[static_cast<std::size_t>(c)], 8, "end",
             "#333", "rotate(-60 " + fmt(cx) + " " + fmt(top + ch * rows + 10) + ")");
  }
  return doc.finish();
}

std::string render_bars(const std::vector<std::string>& labels,
                        const std::vector<double>& values, const PlotStyle& style) {
  if (labels.size() != values.size() || labels.empty())
    throw ValidationError("render_bars: invalid input");
  const double label_w = 210, top = 30, bottom = 30;
  const int n = static_cast<int>(labels.size());
  const double bar_h = std::max(12.0, (style.height - top - bottom) / n);
  const int height = static_cast<int>(top + bar_h * n + bottom);
  Doc doc(style.width, height);
  if (!style.title.empty()) doc.text(style.width / 2.0, 18, style.title, 13, "middle");
  double v_hi = 0;
  for (double v : values)
    if (std::isfinite(v)) v_hi = std::max(v_hi, v);
  if (v_hi <= 0) v_hi = 1;
  const double span = style.width - label_w - 70;
  for (int i = 0; i < n; ++i) {
    const double y = top + bar_h * i;
    doc.text(label_w - 6, y + bar_h / 2 + 3, labels[static_cast<std::size_t>(i)], 9, "end");
    const double v = values[static_cast<std::size_t>(i)];
    if (!std::isfinite(v)) {
      doc.text(label_w + 4, y + bar_h / 2 + 3, "absent", 9, "start", "#999");
      continue;
    }
    doc.rect(label_w, y + 2, span * v / v_hi, bar_h - 4, kPalette[0]);
    doc.text(label_w + span * v / v_hi + 4, y + bar_h / 2 + 3, fmt(v, 3), 9);
  }
  return doc.finish();
}

std::string render_timeline(const Timeline& timeline, const PlotStyle& style) {
  const int t_count = static_cast<int>(timeline.minutes.size());
  const int g_count = static_cast<int>(timeline.class_order.size());
  if (t_count == 0 || g_count == 0) throw ValidationError("render_timeline: empty timeline");
  const double label_w = 110, top = 30, strip_h = 26, axis_h = 40;
  const double cw = std::max(6.0, (style.width - label_w - 16.0) / t_count);
  const int height = static_cast<int>(top + strip_h * (g_count + 2) + axis_h);
  const int width = static_cast<int>(label_w + cw * t_count + 16);
  Doc doc(width, height);
  if (!style.title.empty()) doc.text(width / 2.0, 18, style.title, 13, "middle");

  for (int g = 0; g < g_count; ++g) {
    const double y = top + strip_h * g;
    doc.text(label_w - 4, y + strip_h / 2 + 3, timeline.class_order[static_cast<std::size_t>(g)], 9,
             "end");
    for (int t = 0; t < t_count; ++t) {
      doc.rect(label_w + cw * t, y + 1, cw, strip_h - 2, kPalette[g % 10], "",
               std::max(0.04, timeline.likelihoods(t, g)));
    }
  }
  const double truth_y = top + strip_h * g_count;
  const double pred_y = truth_y + strip_h;
  doc.text(label_w - 4, truth_y + strip_h / 2 + 3, "truth", 9, "end");
  doc.text(label_w - 4, pred_y + strip_h / 2 + 3, "predicted", 9, "end");
  for (int t = 0; t < t_count; ++t) {
    const int tr = timeline.truth[static_cast<std::size_t>(t)];
    doc.rect(label_w + cw * t, truth_y + 3, cw, strip_h - 6,
             tr >= 0 ? kPalette[tr % 10] : "#eee", "#fff");
    doc.rect(label_w + cw * t, pred_y + 3, cw, strip_h - 6,
             kPalette[timeline.predicted[static_cast<std::size_t>(t)] % 10], "#fff");
  }
  const int step = std::max(1, t_count / 8);
  for (int t = 0; t < t_count; t += step) {
    const double x = label_w + cw * t + cw / 2;
    doc.text(x, pred_y + strip_h + 14, format_utc(timeline.minutes[static_cast<std::size_t>(t)])
                                           .substr(11, 5),
             8, "middle");
  }
  return doc.finish();
}

}  // namespace trace2lr::svg
