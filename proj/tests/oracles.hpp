#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's metric code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "headcount/annotations.hpp"

namespace oracle {

/// IoU of integer boxes by counting unit pixels in the covering frame.
inline double raster_iou(const headcount::BoundingBox& a, const headcount::BoundingBox& b) {
  const long x0 = static_cast<long>(std::min(a.left, b.left)), x1 = static_cast<long>(std::max(a.right, b.right));
  const long y0 = static_cast<long>(std::min(a.top, b.top)), y1 = static_cast<long>(std::max(a.bottom, b.bottom));
  auto in = [](const headcount::BoundingBox& r, long x, long y) {
    return x >= r.left && x < r.right && y >= r.top && y < r.bottom;
  };
  long inter = 0, uni = 0;
  for (long y = y0; y < y1; ++y) {
    for (long x = x0; x < x1; ++x) {
      const bool ia = in(a, x, y), ib = in(b, x, y);
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Centered IoU of integer extents, rasterized on a half-pixel grid so both
/// rectangles share an exact center.
inline double raster_centered_iou(long wa, long ha, long wb, long hb) {
  const long wx = std::max(wa, wb), hy = std::max(ha, hb);
  long inter = 0, uni = 0;
  for (long y = -hy; y < hy; ++y) {
    for (long x = -wx; x < wx; ++x) {
      const bool ia = x >= -wa && x < wa && y >= -ha && y < ha;
      const bool ib = x >= -wb && x < wb && y >= -hb && y < hb;
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double plain_iou(const headcount::BoundingBox& a, const headcount::BoundingBox& b) {
  const double l = std::max(a.left, b.left), r = std::min(a.right, b.right);
  const double t = std::max(a.top, b.top), bo = std::min(a.bottom, b.bottom);
  const double inter = (r > l && bo > t) ? (r - l) * (bo - t) : 0.0;
  const double aa = (a.right - a.left) * (a.bottom - a.top), ab = (b.right - b.left) * (b.bottom - b.top);
  return inter / (aa + ab - inter);
}

struct Counts {
  std::size_t tp = 0;
  std::size_t selected = 0;
};

/// Greedy matching of the detections with confidence >= cutoff, from scratch.
inline Counts match_at_cutoff(const headcount::ImageAnnotations& gt, const headcount::ImageDetections& pred,
                              double cutoff, double iou_threshold) {
  std::vector<const headcount::Detection*> sel;
  for (const auto& d : pred.detections) {
    if (d.confidence >= cutoff) sel.push_back(&d);
  }
  std::stable_sort(sel.begin(), sel.end(), [](auto* a, auto* b) { return a->confidence > b->confidence; });
  std::vector<bool> used(gt.boxes.size(), false);
  Counts c;
  c.selected = sel.size();
  for (const auto* d : sel) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gt.boxes.size(); ++g) {
      if (used[g] || gt.boxes[g].class_name != d->class_name) continue;
      const double o = plain_iou(d->box, gt.boxes[g].box);
      if (o > best_iou) best_iou = o, best = static_cast<int>(g);
    }
    if (best >= 0 && best_iou >= iou_threshold) {
      used[static_cast<std::size_t>(best)] = true;
      ++c.tp;
    }
  }
  return c;
}

/// AP by enumerating every confidence cutoff. For each distinct recall
/// level r, the interpolated precision is the maximum precision over all
/// cutoffs reaching recall >= r. Assumes distinct confidences.
inline double brute_force_ap(const std::vector<headcount::ImageAnnotations>& gts,
                             const std::vector<headcount::ImageDetections>& preds, double iou_threshold) {
  std::size_t total_gt = 0;
  for (const auto& g : gts) total_gt += g.boxes.size();
  std::set<double, std::greater<>> cutoffs;
  for (const auto& p : preds) {
    for (const auto& d : p.detections) cutoffs.insert(d.confidence);
  }
  std::vector<std::pair<double, double>> pr;  // (recall, precision)
  for (double c : cutoffs) {
    std::size_t tp = 0, sel = 0;
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const auto cnt = match_at_cutoff(gts[i], preds[i], c, iou_threshold);
      tp += cnt.tp;
      sel += cnt.selected;
    }
    pr.emplace_back(static_cast<double>(tp) / static_cast<double>(total_gt),
                    static_cast<double>(tp) / static_cast<double>(sel));
  }
  std::set<double> levels;
  for (const auto& [r, p] : pr) {
    if (r > 0) levels.insert(r);
  }
  double ap = 0.0, prev = 0.0;
  for (double r : levels) {
    double best = 0.0;
    for (const auto& [rr, pp] : pr) {
      if (rr >= r) best = std::max(best, pp);
    }
    ap += (r - prev) * best;
    prev = r;
  }
  return ap;
}

/// Darknet cfg reader: one key/value map per [section].
struct Section {
  std::string name;
  std::map<std::string, std::string> values;
};

inline std::vector<Section> read_cfg(const std::string& text) {
  std::vector<Section> out;
  std::istringstream in(text);
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      out.push_back({line.substr(1, line.find(']') - 1), {}});
      continue;
    }
    const auto eq = line.find('=');
    out.back().values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::vector<double> numbers(const std::string& csv) {
  std::vector<double> v;
  std::string tok;
  std::istringstream in(csv);
  while (std::getline(in, tok, ',')) v.push_back(std::stod(tok));
  return v;
}

}  // namespace oracle
