#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "headcount/core.hpp"
#include "headcount/datastats.hpp"

namespace headcount::svg {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Series {
  std::string label;
  std::string color;
  std::vector<Point> points;
  double radius = 2.0;
  bool as_line = false;
};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

inline std::string escape(std::string_view s) {
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

/// Fixed-size SVG 1.1 chart with linear axes. All numbers go through
/// fmt::sig so output is byte-stable.
class Chart {
 public:
  Chart(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void set_x_range(Range r) { x_ = fix(r); }
  void set_y_range(Range r) { y_ = fix(r); }
  const Range& x_range() const { return x_; }
  const Range& y_range() const { return y_; }

  void add_series(Series s) { series_.push_back(std::move(s)); }
  void add_bar(double x0, double x1, double height) { bars_.push_back({x0, x1, height}); }
  void add_note(std::string note) { notes_.push_back(std::move(note)); }

  /// Ranges covering every series point and bar, padded 5%.
  void fit_ranges(bool y_from_zero = false) {
    double xl = INFINITY, xh = -INFINITY, yl = INFINITY, yh = -INFINITY;
    for (const auto& s : series_) {
      for (const auto& p : s.points) {
        xl = std::min(xl, p.x), xh = std::max(xh, p.x);
        yl = std::min(yl, p.y), yh = std::max(yh, p.y);
      }
    }
    for (const auto& b : bars_) {
      xl = std::min(xl, b.x0), xh = std::max(xh, b.x1);
      yl = std::min(yl, 0.0), yh = std::max(yh, b.h);
    }
    if (!std::isfinite(xl)) xl = 0, xh = 1, yl = 0, yh = 1;
    if (y_from_zero) yl = std::min(yl, 0.0);
    const double px = (xh - xl) * 0.05, py = (yh - yl) * 0.05;
    x_ = fix({xl - px, xh + px});
    y_ = fix({y_from_zero ? yl : yl - py, yh + py});
  }

  std::string render() const {
    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + ' ' + num(kHeight) + "\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
    s += text(kWidth / 2, 24, title_, "middle", 16);
    s += text(kLeft + plot_w() / 2, kHeight - 12, x_label_, "middle", 12);
    s += "<text x=\"16\" y=\"" + num(kTop + plot_h() / 2) + "\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 16 " + num(kTop + plot_h() / 2) + ")\">" +
         escape(y_label_) + "</text>\n";
    s += axes();
    for (const auto& b : bars_) {
      const double x0 = sx(b.x0), x1 = sx(b.x1), y0 = sy(0.0 < y_.lo ? y_.lo : 0.0), y1 = sy(b.h);
      const double w = std::max(1.0, x1 - x0);
      s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y1) + "\" width=\"" + num(w) + "\" height=\"" +
           num(std::max(0.0, y0 - y1)) + "\" fill=\"#8c8c8c\" stroke=\"#404040\" stroke-width=\"0.5\"/>\n";
    }
    for (const auto& series : series_) {
      s += "<g fill=\"" + series.color + "\" stroke=\"" + series.color + "\">\n";
      if (series.as_line && !series.points.empty()) {
        s += "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series.points.size(); ++i) {
          if (i) s += ' ';
          s += num(sx(series.points[i].x)) + ',' + num(sy(series.points[i].y));
        }
        s += "\"/>\n";
      } else {
        for (const auto& p : series.points) {
          s += "<circle cx=\"" + num(sx(p.x)) + "\" cy=\"" + num(sy(p.y)) + "\" r=\"" + num(series.radius) +
               "\" fill-opacity=\"0.6\" stroke-width=\"0.3\"/>\n";
        }
      }
      s += "</g>\n";
    }
    double ly = kTop + 14;
    for (const auto& series : series_) {
      if (series.label.empty()) continue;
      s += "<rect x=\"" + num(kLeft + plot_w() - 150) + "\" y=\"" + num(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
           series.color + "\"/>\n";
      s += text(kLeft + plot_w() - 135, ly, series.label, "start", 11);
      ly += 16;
    }
    for (const auto& n : notes_) {
      s += text(kLeft + 10, ly, n, "start", 12);
      ly += 16;
    }
    s += "</svg>\n";
    return s;
  }

 private:
  struct Bar {
    double x0, x1, h;
  };

  static constexpr double kWidth = 640, kHeight = 480, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

  static double plot_w() { return kWidth - kLeft - kRight; }
  static double plot_h() { return kHeight - kTop - kBottom; }
  static std::string num(double v) { return fmt::sig(std::round(v * 100.0) / 100.0); }

  static Range fix(Range r) {
    if (!(r.hi > r.lo)) {
      const double pad = std::max(std::fabs(r.lo) * 0.5, 0.5);
      return {r.lo - pad, r.lo + pad};
    }
    return r;
  }

  double sx(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * plot_w(); }
  double sy(double y) const { return kTop + plot_h() - (y - y_.lo) / (y_.hi - y_.lo) * plot_h(); }

  static std::string text(double x, double y, std::string_view t, std::string_view anchor, int size) {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           std::to_string(size) + "\" text-anchor=\"" + std::string(anchor) + "\">" + escape(t) + "</text>\n";
  }

  std::string axes() const {
    std::string s;
    const double x0 = kLeft, x1 = kLeft + plot_w(), y0 = kTop + plot_h(), y1 = kTop;
    s += "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) + "\"/>\n";
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y1) + "\"/>\n";
    s += "</g>\n";
    for (int i = 0; i <= 5; ++i) {
      const double xv = x_.lo + (x_.hi - x_.lo) * i / 5.0;
      const double yv = y_.lo + (y_.hi - y_.lo) * i / 5.0;
      s += "<line x1=\"" + num(sx(xv)) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(sx(xv)) + "\" y2=\"" + num(y0 + 5) +
           "\" stroke=\"black\"/>\n";
      s += text(sx(xv), y0 + 18, fmt::sig(xv, 4), "middle", 10);
      s += "<line x1=\"" + num(x0 - 5) + "\" y1=\"" + num(sy(yv)) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(sy(yv)) +
           "\" stroke=\"black\"/>\n";
      s += text(x0 - 8, sy(yv) + 3, fmt::sig(yv, 4), "end", 10);
    }
    return s;
  }

  std::string title_, x_label_, y_label_;
  Range x_, y_;
  std::vector<Series> series_;
  std::vector<Bar> bars_;
  std::vector<std::string> notes_;
};

inline std::string histogram_chart(std::span<const HistogramBin> bins, const std::string& title,
                                   const std::string& x_label) {
  Chart c(title, x_label, "images");
  for (const auto& b : bins) c.add_bar(b.left, b.right, static_cast<double>(b.count));
  c.fit_ranges(true);
  return c.render();
}

}  // namespace headcount::svg
