#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "headcount/annotations.hpp"
#include "headcount/core.hpp"
#include "headcount/geometry.hpp"

namespace headcount {

/// Intersection over union of two boxes; 0 when disjoint.
inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double iw = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double ih = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

struct DetectionVerdict {
  std::size_t detection_index = 0;  // position in the prediction file
  double confidence = 0.0;
  bool true_positive = false;
  std::optional<std::size_t> gt_index;  // matched ground-truth box
  double iou = 0.0;                      // best IoU against unmatched ground truth
};

struct MatchResult {
  std::string image_id;
  std::vector<DetectionVerdict> verdicts;  // descending confidence, ties by file order
  std::size_t gt_count = 0;
  std::size_t false_negatives = 0;

  std::size_t true_positives() const {
    return static_cast<std::size_t>(
        std::count_if(verdicts.begin(), verdicts.end(), [](const DetectionVerdict& v) { return v.true_positive; }));
  }
};

/// Greedy matching in descending confidence. Each detection takes the
/// still-unmatched ground-truth box of the same class with the highest IoU
/// (ties to the lower index) if that IoU reaches the threshold.
///
/// With `class_filter`, only boxes and detections of that class take part.
inline MatchResult match_detections(const ImageAnnotations& gt, const ImageDetections& pred,
                                    double iou_threshold = 0.70,
                                    std::optional<std::string_view> class_filter = std::nullopt) {
  if (gt.image_id != pred.image_id) {
    throw Error("image id mismatch: ground truth '" + gt.image_id + "' vs predictions '" + pred.image_id + "'");
  }
  MatchResult out;
  out.image_id = gt.image_id;

  std::vector<std::size_t> gt_idx;
  for (std::size_t i = 0; i < gt.boxes.size(); ++i) {
    if (!class_filter || gt.boxes[i].class_name == *class_filter) gt_idx.push_back(i);
  }
  out.gt_count = gt_idx.size();

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pred.detections.size(); ++i) {
    if (!class_filter || pred.detections[i].class_name == *class_filter) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pred.detections[a].confidence > pred.detections[b].confidence;
  });

  std::vector<bool> taken(gt.boxes.size(), false);
  for (std::size_t d : order) {
    const Detection& det = pred.detections[d];
    DetectionVerdict v;
    v.detection_index = d;
    v.confidence = det.confidence;
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g : gt_idx) {
      if (taken[g] || gt.boxes[g].class_name != det.class_name) continue;
      const double o = iou(det.box, gt.boxes[g].box);
      if (o > best_iou) {
        best_iou = o;
        best = g;
      }
    }
    if (best) v.iou = best_iou;
    if (best && best_iou >= iou_threshold) {
      taken[*best] = true;
      v.true_positive = true;
      v.gt_index = best;
    }
    out.verdicts.push_back(v);
  }
  out.false_negatives = out.gt_count - out.true_positives();
  return out;
}

enum class ApInterpolation { all_point, eleven_point };

struct PRPoint {
  std::size_t rank = 0;  // 1-based
  double confidence = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool true_positive = false;
  std::string image_id;
  std::size_t detection_index = 0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // global descending-confidence rank order
  double ap = 0.0;
};

/// Area under the precision envelope of ranked points.
inline double area_under_envelope(std::span<const PRPoint> points, ApInterpolation interp) {
  if (points.empty()) return 0.0;
  if (interp == ApInterpolation::eleven_point) {
    double sum = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double r = t / 10.0;
      double best = 0.0;
      for (const auto& p : points) {
        if (p.recall >= r - 1e-12) best = std::max(best, p.precision);
      }
      sum += best;
    }
    return sum / 11.0;
  }
  // All-point: precision made non-increasing from the right, then summed
  // over every step in recall.
  const std::size_t n = points.size();
  std::vector<double> env(n);
  env[n - 1] = points[n - 1].precision;
  for (std::size_t i = n - 1; i-- > 0;) env[i] = std::max(points[i].precision, env[i + 1]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (points[i].recall > prev_recall) {
      ap += (points[i].recall - prev_recall) * env[i];
      prev_recall = points[i].recall;
    }
  }
  return ap;
}

/// Ranks every verdict across images by (confidence desc, image id,
/// detection index) and integrates the precision-recall curve.
inline PRCurve average_precision(std::span<const MatchResult> matches, std::size_t total_gt,
                                 ApInterpolation interp = ApInterpolation::all_point) {
  if (total_gt == 0) throw Error("average precision is undefined without ground-truth boxes");
  PRCurve curve;
  for (const auto& m : matches) {
    for (const auto& v : m.verdicts) {
      PRPoint p;
      p.confidence = v.confidence;
      p.true_positive = v.true_positive;
      p.image_id = m.image_id;
      p.detection_index = v.detection_index;
      curve.points.push_back(std::move(p));
    }
  }
  std::sort(curve.points.begin(), curve.points.end(), [](const PRPoint& a, const PRPoint& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    return a.detection_index < b.detection_index;
  });
  std::size_t tp = 0;
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    auto& p = curve.points[k];
    if (p.true_positive) ++tp;
    p.rank = k + 1;
    p.precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    p.recall = static_cast<double>(tp) / static_cast<double>(total_gt);
  }
  curve.ap = area_under_envelope(curve.points, interp);
  return curve;
}

struct CountPair {
  std::string image_id;
  std::size_t true_count = 0;
  std::size_t predicted_count = 0;
};

enum class RSquaredMode {
  correlation,  // squared Pearson correlation
  identity      // 1 - SS_res / SS_tot about the line predicted == true
};

struct CountRegression {
  std::vector<CountPair> pairs;
  double r_squared = 0.0;
};

struct EvalReport {
  std::map<std::string, double> ap_per_class;
  std::map<std::string, PRCurve> curves;
  double map_score = 0.0;
  std::vector<MatchResult> matches;  // all classes, dataset order
  std::vector<CountPair> count_pairs;
  std::optional<double> r_squared;
  std::string r_squared_note;  // why r_squared is absent
  double iou_threshold = 0.70;
  double confidence_threshold = 0.5;
};

namespace detail {

inline std::map<std::string_view, const ImageDetections*> index_predictions(const Dataset& gt,
                                                                             std::span<const ImageDetections> preds) {
  std::map<std::string_view, const ImageDetections*> by_id;
  for (const auto& p : preds) {
    if (!gt.find(p.image_id)) throw Error("predictions reference unknown image '" + p.image_id + "'");
    if (!by_id.emplace(p.image_id, &p).second) throw Error("duplicate predictions for image '" + p.image_id + "'");
  }
  return by_id;
}

}  // namespace detail

/// Per-class AP over the classes present in the ground truth, and their
/// mean. Images without a prediction entry count as all misses.
inline EvalReport mean_average_precision(const Dataset& gt, std::span<const ImageDetections> preds,
                                         double iou_threshold = 0.70,
                                         ApInterpolation interp = ApInterpolation::all_point) {
  const auto by_id = detail::index_predictions(gt, preds);
  EvalReport report;
  report.iou_threshold = iou_threshold;

  std::set<std::string> classes;
  for (const auto& [id, img] : gt.images()) {
    for (const auto& g : img.boxes) classes.insert(g.class_name);
  }
  if (classes.empty()) throw Error("ground truth contains no boxes");

  auto prediction_for = [&](const std::string& id) {
    auto it = by_id.find(id);
    return it == by_id.end() ? ImageDetections{id, {}} : *it->second;
  };

  for (const auto& [id, img] : gt.images()) {
    report.matches.push_back(match_detections(img, prediction_for(id), iou_threshold));
  }

  double sum = 0.0;
  for (const auto& cls : classes) {
    std::vector<MatchResult> per_class;
    std::size_t total = 0;
    for (const auto& [id, img] : gt.images()) {
      per_class.push_back(match_detections(img, prediction_for(id), iou_threshold, cls));
      total += per_class.back().gt_count;
    }
    PRCurve curve = average_precision(per_class, total, interp);
    report.ap_per_class[cls] = curve.ap;
    sum += curve.ap;
    report.curves.emplace(cls, std::move(curve));
  }
  report.map_score = sum / static_cast<double>(classes.size());
  return report;
}

/// Squared Pearson correlation; 0 when either side has no variance.
inline double pearson_r_squared(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return (sxy * sxy) / (sxx * syy);
}

/// 1 - SS_res / SS_tot with predicted == true as the model. Can be negative.
inline double identity_r_squared(std::span<const double> truth, std::span<const double> predicted) {
  const double n = static_cast<double>(truth.size());
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

/// Per-image (true, predicted) counts, counting detections at or above the
/// confidence threshold, and their R².
inline CountRegression count_regression(const Dataset& gt, std::span<const ImageDetections> preds,
                                        double confidence_threshold = 0.5,
                                        RSquaredMode mode = RSquaredMode::correlation) {
  const auto by_id = detail::index_predictions(gt, preds);
  if (gt.size() < 2) throw Error("count regression needs at least 2 images");
  CountRegression out;
  std::vector<double> truth, predicted;
  for (const auto& [id, img] : gt.images()) {
    CountPair p{id, img.boxes.size(), 0};
    if (auto it = by_id.find(id); it != by_id.end()) {
      for (const auto& d : it->second->detections) {
        if (d.confidence >= confidence_threshold) ++p.predicted_count;
      }
    }
    truth.push_back(static_cast<double>(p.true_count));
    predicted.push_back(static_cast<double>(p.predicted_count));
    out.pairs.push_back(std::move(p));
  }
  if (std::all_of(truth.begin(), truth.end(), [&](double t) { return t == truth.front(); })) {
    throw Error("count regression needs varying true counts");
  }
  out.r_squared = mode == RSquaredMode::correlation ? pearson_r_squared(truth, predicted)
                                                    : identity_r_squared(truth, predicted);
  return out;
}

struct EvalOptions {
  double iou_threshold = 0.70;
  double confidence_threshold = 0.5;
  ApInterpolation interpolation = ApInterpolation::all_point;
  RSquaredMode r_squared_mode = RSquaredMode::correlation;
};

/// mAP plus count agreement. R² is left empty, with a note, when the corpus
/// cannot support it (one image or constant true counts).
inline EvalReport evaluate(const Dataset& gt, std::span<const ImageDetections> preds, const EvalOptions& opt = {}) {
  EvalReport report = mean_average_precision(gt, preds, opt.iou_threshold, opt.interpolation);
  report.confidence_threshold = opt.confidence_threshold;
  const auto by_id = detail::index_predictions(gt, preds);
  for (const auto& [id, img] : gt.images()) {
    CountPair p{id, img.boxes.size(), 0};
    if (auto it = by_id.find(id); it != by_id.end()) {
      for (const auto& d : it->second->detections) {
        if (d.confidence >= opt.confidence_threshold) ++p.predicted_count;
      }
    }
    report.count_pairs.push_back(std::move(p));
  }
  try {
    report.r_squared = count_regression(gt, preds, opt.confidence_threshold, opt.r_squared_mode).r_squared;
  } catch (const Error& e) {
    report.r_squared_note = e.what();
  }
  return report;
}

// CSV writers.

inline std::string eval_report_csv(const EvalReport& r) {
  std::string s = "metric,value\n";
  s += "map," + fmt::sig(r.map_score) + '\n';
  for (const auto& [cls, ap] : r.ap_per_class) s += "ap[" + cls + "]," + fmt::sig(ap) + '\n';
  s += "r_squared," + (r.r_squared ? fmt::sig(*r.r_squared) : std::string("NA")) + '\n';
  s += "iou_threshold," + fmt::sig(r.iou_threshold) + '\n';
  s += "confidence_threshold," + fmt::sig(r.confidence_threshold) + '\n';
  s += "\nimage_id,true_count,predicted_count\n";
  for (const auto& p : r.count_pairs) {
    s += p.image_id + ',' + std::to_string(p.true_count) + ',' + std::to_string(p.predicted_count) + '\n';
  }
  return s;
}

inline std::string pr_curve_csv(const PRCurve& curve) {
  std::string s = "rank,confidence,precision,recall\n";
  for (const auto& p : curve.points) {
    s += std::to_string(p.rank) + ',' + fmt::sig(p.confidence) + ',' + fmt::sig(p.precision) + ',' +
         fmt::sig(p.recall) + '\n';
  }
  return s;
}

inline std::string count_pairs_csv(std::span<const CountPair> pairs) {
  std::string s = "image_id,true_count,predicted_count\n";
  for (const auto& p : pairs) {
    s += p.image_id + ',' + std::to_string(p.true_count) + ',' + std::to_string(p.predicted_count) + '\n';
  }
  return s;
}

/// Ground truth tagged `gt` (verdict tp/fn) and predictions tagged `pred`
/// (verdict tp/fp) for one image.
inline std::string overlay_csv(const ImageAnnotations& gt, const ImageDetections& pred, const MatchResult& m) {
  std::vector<bool> matched(gt.boxes.size(), false);
  std::vector<const DetectionVerdict*> by_det(pred.detections.size(), nullptr);
  for (const auto& v : m.verdicts) {
    if (v.gt_index) matched[*v.gt_index] = true;
    by_det[v.detection_index] = &v;
  }
  auto box = [](const BoundingBox& b) {
    return fmt::sig(b.left) + ',' + fmt::sig(b.top) + ',' + fmt::sig(b.right) + ',' + fmt::sig(b.bottom);
  };
  std::string s = "tag,class,confidence,left,top,right,bottom,verdict\n";
  for (std::size_t i = 0; i < gt.boxes.size(); ++i) {
    s += "gt," + gt.boxes[i].class_name + ",," + box(gt.boxes[i].box) + ',' + (matched[i] ? "tp" : "fn") + '\n';
  }
  for (std::size_t i = 0; i < pred.detections.size(); ++i) {
    const auto& d = pred.detections[i];
    const bool tp = by_det[i] && by_det[i]->true_positive;
    s += "pred," + d.class_name + ',' + fmt::sig(d.confidence) + ',' + box(d.box) + ',' + (tp ? "tp" : "fp") + '\n';
  }
  return s;
}

}  // namespace headcount
