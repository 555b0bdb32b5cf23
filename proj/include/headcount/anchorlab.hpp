#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "headcount/core.hpp"
#include "headcount/geometry.hpp"
#include "headcount/random.hpp"

namespace headcount {

/// A (width, height) prior for a single-shot detector.
struct Anchor {
  double width = 0.0;
  double height = 0.0;

  double area() const noexcept { return width * height; }
  bool operator==(const Anchor&) const = default;
};

/// IoU of two rectangles sharing a center; depends only on their extents.
template <Extent A, Extent B>
double centered_iou(const A& a, const B& b) noexcept {
  const double wa = a.width, ha = a.height, wb = b.width, hb = b.height;
  const double inter = std::min(wa, wb) * std::min(ha, hb);
  const double uni = wa * ha + wb * hb - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Anchors sorted by area (ties by width, then height) without exact
/// duplicates, plus an optional per-layer mask assignment.
class AnchorSet {
 public:
  AnchorSet() = default;

  explicit AnchorSet(std::vector<Anchor> anchors) : anchors_(std::move(anchors)) {
    for (const auto& a : anchors_) {
      if (!(a.width > 0.0) || !(a.height > 0.0) || !std::isfinite(a.width) || !std::isfinite(a.height)) {
        throw Error("anchor dimensions must be positive and finite");
      }
    }
    std::stable_sort(anchors_.begin(), anchors_.end(), [](const Anchor& x, const Anchor& y) {
      if (x.area() != y.area()) return x.area() < y.area();
      if (x.width != y.width) return x.width < y.width;
      return x.height < y.height;
    });
    anchors_.erase(std::unique(anchors_.begin(), anchors_.end()), anchors_.end());
  }

  const std::vector<Anchor>& anchors() const noexcept { return anchors_; }
  const std::vector<std::vector<std::size_t>>& masks() const noexcept { return masks_; }
  std::size_t size() const noexcept { return anchors_.size(); }
  bool empty() const noexcept { return anchors_.empty(); }
  const Anchor& operator[](std::size_t i) const { return anchors_[i]; }

  /// Copy with the given masks; indices must be valid and disjoint.
  AnchorSet with_masks(std::vector<std::vector<std::size_t>> masks) const {
    std::vector<bool> used(anchors_.size(), false);
    for (const auto& layer : masks) {
      for (std::size_t i : layer) {
        if (i >= anchors_.size()) throw Error("mask index " + std::to_string(i) + " out of range");
        if (used[i]) throw Error("mask index " + std::to_string(i) + " assigned to more than one layer");
        used[i] = true;
      }
    }
    AnchorSet out = *this;
    out.masks_ = std::move(masks);
    return out;
  }

  bool operator==(const AnchorSet&) const = default;

 private:
  std::vector<Anchor> anchors_;
  std::vector<std::vector<std::size_t>> masks_;
};

// ---------------------------------------------------------------------------
// k-means

enum class KMeansDistance { euclidean, one_minus_iou };

struct KMeansOptions {
  std::size_t k = 9;
  KMeansDistance distance = KMeansDistance::one_minus_iou;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 1000;
};

struct KMeansFit {
  AnchorSet anchors;               // rounded to 2 decimals
  std::vector<Anchor> centroids;   // unrounded, cluster order
  std::vector<std::size_t> assignment;
  std::vector<double> objective_trace;  // after the initial assignment and after each iteration
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline double kmeans_distance(const BoxDims& p, const Anchor& c, KMeansDistance d) noexcept {
  if (d == KMeansDistance::euclidean) return std::hypot(p.width - c.width, p.height - c.height);
  return 1.0 - centered_iou(p, c);
}

// Euclidean clusters minimise squared distance (the mean is then optimal);
// the IoU variant minimises 1 - IoU directly.
inline double kmeans_cost(const BoxDims& p, const Anchor& c, KMeansDistance d) noexcept {
  const double x = kmeans_distance(p, c, d);
  return d == KMeansDistance::euclidean ? x * x : x;
}

inline std::size_t nearest(const BoxDims& p, std::span<const Anchor> centers, KMeansDistance d) noexcept {
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double cost = kmeans_cost(p, centers[c], d);
    if (cost < best_cost) {
      best_cost = cost;
      best = c;
    }
  }
  return best;
}

inline std::size_t count_distinct(std::span<const BoxDims> dims) {
  std::vector<std::pair<double, double>> v;
  v.reserve(dims.size());
  for (const auto& d : dims) v.emplace_back(d.width, d.height);
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

inline double round_to(double x, double scale) { return std::round(x * scale) / scale; }

}  // namespace detail

/// Total within-cluster cost of an assignment.
inline double kmeans_objective(std::span<const BoxDims> dims, std::span<const Anchor> centers,
                               std::span<const std::size_t> assignment, KMeansDistance d) {
  double total = 0.0;
  for (std::size_t i = 0; i < dims.size(); ++i) total += detail::kmeans_cost(dims[i], centers[assignment[i]], d);
  return total;
}

/// k-means++ seeding followed by Lloyd iterations.
///
/// For the IoU distance the coordinate mean is not the cost minimiser, so a
/// cluster adopts its new mean only when that does not raise the cluster's
/// cost. Both distances therefore have a non-increasing objective trace.
inline KMeansFit kmeans_fit(std::span<const BoxDims> dims, const KMeansOptions& opt) {
  if (opt.k == 0) throw Error("k must be at least 1");
  if (dims.size() < opt.k) throw Error("k exceeds the number of boxes");
  if (detail::count_distinct(dims) < opt.k) throw Error("k exceeds the number of distinct box dimensions");
  const KMeansDistance dist = opt.distance;
  const std::size_t n = dims.size();

  Rng rng(opt.seed);
  std::vector<Anchor> centers;
  centers.reserve(opt.k);
  {
    const auto& first = dims[rng.index(n)];
    centers.push_back({first.width, first.height});
    std::vector<double> weight(n);
    while (centers.size() < opt.k) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) best = std::min(best, detail::kmeans_distance(dims[i], c, dist));
        weight[i] = best * best;
        total += weight[i];
      }
      const double target = rng.uniform() * total;
      double acc = 0.0;
      std::size_t pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (weight[i] <= 0.0) continue;
        acc += weight[i];
        pick = i;
        if (acc > target) break;
      }
      centers.push_back({dims[pick].width, dims[pick].height});
    }
  }

  KMeansFit fit;
  fit.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.assignment[i] = detail::nearest(dims[i], centers, dist);
  fit.objective_trace.push_back(kmeans_objective(dims, centers, fit.assignment, dist));

  std::vector<double> sum_w(opt.k), sum_h(opt.k);
  std::vector<std::size_t> members(opt.k);
  while (fit.iterations < opt.max_iterations) {
    ++fit.iterations;
    std::fill(sum_w.begin(), sum_w.end(), 0.0);
    std::fill(sum_h.begin(), sum_h.end(), 0.0);
    std::fill(members.begin(), members.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum_w[fit.assignment[i]] += dims[i].width;
      sum_h[fit.assignment[i]] += dims[i].height;
      ++members[fit.assignment[i]];
    }
    for (std::size_t c = 0; c < opt.k; ++c) {
      if (members[c] == 0) continue;  // keep an emptied cluster where it was
      const double m = static_cast<double>(members[c]);
      const Anchor mean{sum_w[c] / m, sum_h[c] / m};
      if (dist == KMeansDistance::one_minus_iou) {
        double old_cost = 0.0, new_cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (fit.assignment[i] != c) continue;
          old_cost += detail::kmeans_cost(dims[i], centers[c], dist);
          new_cost += detail::kmeans_cost(dims[i], mean, dist);
        }
        if (new_cost > old_cost) continue;
      }
      centers[c] = mean;
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = detail::nearest(dims[i], centers, dist);
      if (c != fit.assignment[i]) {
        fit.assignment[i] = c;
        changed = true;
      }
    }
    fit.objective_trace.push_back(kmeans_objective(dims, centers, fit.assignment, dist));
    if (!changed) {
      fit.converged = true;
      break;
    }
  }

  fit.centroids = centers;
  std::vector<Anchor> rounded;
  for (const auto& c : centers) {
    rounded.push_back({std::max(0.01, detail::round_to(c.width, 100.0)), std::max(0.01, detail::round_to(c.height, 100.0))});
  }
  fit.anchors = AnchorSet(std::move(rounded));
  return fit;
}

inline AnchorSet kmeans_anchors(std::span<const BoxDims> dims, std::size_t k,
                                KMeansDistance distance = KMeansDistance::one_minus_iou, std::uint64_t seed = 0) {
  return kmeans_fit(dims, {k, distance, seed, 1000}).anchors;
}

// ---------------------------------------------------------------------------
// Line-fit sampling

/// Least-squares line height = slope * width + intercept.
struct LineModel {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double width) const noexcept { return slope * width + intercept; }
};

inline LineModel fit_height_on_width(std::span<const BoxDims> dims) {
  if (detail::count_distinct(dims) < 2 || dims.empty()) {
    throw Error("line fit needs at least two distinct widths; use kmeans_anchors instead");
  }
  const double n = static_cast<double>(dims.size());
  double mw = 0.0, mh = 0.0;
  for (const auto& d : dims) {
    mw += d.width;
    mh += d.height;
  }
  mw /= n;
  mh /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& d : dims) {
    sxx += (d.width - mw) * (d.width - mw);
    sxy += (d.width - mw) * (d.height - mh);
  }
  if (!(sxx > 0.0)) throw Error("line fit is degenerate: all widths are equal; use kmeans_anchors instead");
  const double slope = sxy / sxx;
  return {slope, mh - slope * mw};
}

struct LineFitOptions {
  std::size_t n_line = 9;
  std::optional<Anchor> floor = Anchor{10.0, 10.0};
  std::size_t n_total = 13;
  std::size_t variance_bins = 10;
};

/// Residual spread of one equal-count width bin.
struct VarianceBin {
  double mean_width = 0.0;
  double residual_variance = 0.0;
  std::size_t count = 0;
};

struct LineFitResult {
  AnchorSet anchors;
  LineModel line;
  std::vector<Anchor> line_samples;
  std::optional<Anchor> floor_added;
  std::vector<Anchor> variance_extras;
  std::vector<VarianceBin> bins;  // in width order
};

/// Equal-count bins over dims sorted by width. Bin i covers sorted positions
/// [i*n/B, (i+1)*n/B).
inline std::vector<VarianceBin> residual_variance_bins(std::span<const BoxDims> dims, const LineModel& line,
                                                       std::size_t bin_count) {
  std::vector<BoxDims> sorted(dims.begin(), dims.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const BoxDims& a, const BoxDims& b) {
    return a.width != b.width ? a.width < b.width : a.height < b.height;
  });
  const std::size_t n = sorted.size();
  const std::size_t bins = std::min(bin_count, n);
  std::vector<VarianceBin> out;
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
    VarianceBin vb;
    vb.count = hi - lo;
    double sum_w = 0.0, sum_r = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      sum_w += sorted[i].width;
      sum_r += sorted[i].height - line(sorted[i].width);
    }
    const double m = static_cast<double>(vb.count);
    vb.mean_width = sum_w / m;
    const double mean_r = sum_r / m;
    double ss = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double r = sorted[i].height - line(sorted[i].width) - mean_r;
      ss += r * r;
    }
    vb.residual_variance = ss / m;
    out.push_back(vb);
  }
  return out;
}

/// Anchors sampled along a least-squares line through the box dimensions,
/// a floor anchor for the smallest boxes, and extra anchors one residual
/// standard deviation off the line in the widest-spread width bins.
///
/// 1. Fit height = a * width + b.
/// 2. Sample n_line anchors at width quantiles i / (n_line + 1).
/// 3. Add the floor anchor if it is smaller than every sample.
/// 4. Rank equal-count width bins by residual variance and add anchors at
///    (bin mean width, line +/- bin residual SD), alternating sign, until
///    n_total anchors exist. A second pass over the bins flips the signs.
/// Line and variance anchors are rounded to whole pixels.
inline LineFitResult linefit_fit(std::span<const BoxDims> dims, const LineFitOptions& opt = {}) {
  if (opt.n_line == 0) throw Error("n_line must be at least 1");
  if (opt.n_total < opt.n_line + 1) throw Error("n_total must be at least n_line + 1");
  if (opt.variance_bins == 0) throw Error("variance_bins must be at least 1");
  LineFitResult res;
  res.line = fit_height_on_width(dims);

  auto whole = [](double w, double h) { return Anchor{std::max(1.0, std::round(w)), std::max(1.0, std::round(h))}; };

  std::vector<double> widths;
  widths.reserve(dims.size());
  for (const auto& d : dims) widths.push_back(d.width);
  std::sort(widths.begin(), widths.end());
  auto width_quantile = [&](double p) {
    const double pos = p * static_cast<double>(widths.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, widths.size() - 1);
    return widths[lo] + (widths[hi] - widths[lo]) * (pos - static_cast<double>(lo));
  };

  std::vector<Anchor> chosen;
  auto contains = [&](const Anchor& a) { return std::find(chosen.begin(), chosen.end(), a) != chosen.end(); };

  for (std::size_t i = 1; i <= opt.n_line; ++i) {
    const double w = width_quantile(static_cast<double>(i) / static_cast<double>(opt.n_line + 1));
    const Anchor a = whole(w, res.line(w));
    res.line_samples.push_back(a);
    if (!contains(a)) chosen.push_back(a);
  }

  if (opt.floor) {
    double smallest = std::numeric_limits<double>::infinity();
    for (const auto& a : res.line_samples) smallest = std::min(smallest, a.area());
    if (opt.floor->area() < smallest && !contains(*opt.floor)) {
      chosen.push_back(*opt.floor);
      res.floor_added = *opt.floor;
    }
  }

  res.bins = residual_variance_bins(dims, res.line, opt.variance_bins);
  std::vector<std::size_t> rank(res.bins.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return res.bins[a].residual_variance > res.bins[b].residual_variance;
  });
  for (std::size_t pass = 0; pass < 2 && chosen.size() < opt.n_total; ++pass) {
    for (std::size_t r = 0; r < rank.size() && chosen.size() < opt.n_total; ++r) {
      const VarianceBin& bin = res.bins[rank[r]];
      const double sign = (r + pass) % 2 == 0 ? 1.0 : -1.0;
      const Anchor a = whole(bin.mean_width, res.line(bin.mean_width) + sign * std::sqrt(bin.residual_variance));
      if (contains(a)) continue;
      chosen.push_back(a);
      res.variance_extras.push_back(a);
    }
  }

  res.anchors = AnchorSet(std::move(chosen));
  return res;
}

inline AnchorSet linefit_anchors(std::span<const BoxDims> dims, const LineFitOptions& opt = {}) {
  return linefit_fit(dims, opt).anchors;
}

// ---------------------------------------------------------------------------
// Diagnostics and configuration

struct CoverageDiagnostic {
  double mean_best_iou = 0.0;
  double recall_at_t = 0.0;
  double threshold_t = 0.5;
  std::vector<std::size_t> per_anchor_assignment_counts;
  std::vector<double> best_iou;  // per box, input order
};

/// Assigns every box to its best centered-IoU anchor (ties go to the lower
/// index) and summarises how well the anchors cover the boxes.
inline CoverageDiagnostic coverage(std::span<const BoxDims> dims, const AnchorSet& anchors, double threshold_t = 0.5) {
  if (dims.empty()) throw Error("coverage needs at least one box");
  if (anchors.empty()) throw Error("coverage needs at least one anchor");
  CoverageDiagnostic diag;
  diag.threshold_t = threshold_t;
  diag.per_anchor_assignment_counts.assign(anchors.size(), 0);
  std::size_t hits = 0;
  double sum = 0.0;
  for (const auto& d : dims) {
    std::size_t best = 0;
    double best_iou = -1.0;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double v = centered_iou(d, anchors[a]);
      if (v > best_iou) {
        best_iou = v;
        best = a;
      }
    }
    ++diag.per_anchor_assignment_counts[best];
    diag.best_iou.push_back(best_iou);
    sum += best_iou;
    if (best_iou >= threshold_t) ++hits;
  }
  const double n = static_cast<double>(dims.size());
  diag.mean_best_iou = sum / n;
  diag.recall_at_t = static_cast<double>(hits) / n;
  return diag;
}

/// Contiguous layer masks: the smallest anchors go to the first layer.
inline AnchorSet assign_masks(const AnchorSet& anchors, std::span<const std::size_t> layer_sizes) {
  const std::size_t total = std::accumulate(layer_sizes.begin(), layer_sizes.end(), std::size_t{0});
  if (total != anchors.size()) {
    throw Error("layer sizes sum to " + std::to_string(total) + " but there are " + std::to_string(anchors.size()) +
                " anchors");
  }
  std::vector<std::vector<std::size_t>> masks;
  std::size_t next = 0;
  for (std::size_t size : layer_sizes) {
    std::vector<std::size_t> layer(size);
    std::iota(layer.begin(), layer.end(), next);
    next += size;
    masks.push_back(std::move(layer));
  }
  return anchors.with_masks(std::move(masks));
}

inline AnchorSet assign_masks(const AnchorSet& anchors, std::initializer_list<std::size_t> layer_sizes) {
  return assign_masks(anchors, std::span<const std::size_t>(layer_sizes.begin(), layer_sizes.size()));
}

/// The [yolo] section parameters a tuned anchor set is deployed with.
struct DarknetConfigFragment {
  AnchorSet anchors;
  int classes = 1;
  double jitter = 0.3;
  double ignore_threshold = 0.7;
  double truth_threshold = 1.0;
  double random = 1.0;

  std::size_t number() const noexcept { return anchors.size(); }
};

/// One [yolo] section per mask (one unmasked section when there are no
/// masks). Every section lists all anchors, as Darknet expects.
inline std::string emit_darknet_fragment(const DarknetConfigFragment& config) {
  if (config.classes < 1) throw Error("classes must be at least 1");
  std::string anchors_line = "anchors = ";
  for (std::size_t i = 0; i < config.anchors.size(); ++i) {
    if (i) anchors_line += ", ";
    anchors_line += fmt::integral_or_shortest(config.anchors[i].width) + ',' +
                    fmt::integral_or_shortest(config.anchors[i].height);
  }

  auto section = [&](const std::vector<std::size_t>* mask) {
    std::string s = "[yolo]\n";
    if (mask) {
      s += "mask = ";
      for (std::size_t i = 0; i < mask->size(); ++i) s += (i ? "," : "") + std::to_string((*mask)[i]);
      s += '\n';
    }
    s += anchors_line + '\n';
    s += "classes = " + std::to_string(config.classes) + '\n';
    s += "num = " + std::to_string(config.number()) + '\n';
    s += "jitter = " + fmt::with_point(config.jitter) + '\n';
    s += "ignore_thresh = " + fmt::with_point(config.ignore_threshold) + '\n';
    s += "truth_thresh = " + fmt::with_point(config.truth_threshold) + '\n';
    s += "random = " + fmt::with_point(config.random) + '\n';
    return s;
  };

  if (config.anchors.masks().empty()) return section(nullptr);
  std::string out;
  for (std::size_t i = 0; i < config.anchors.masks().size(); ++i) {
    if (i) out += '\n';
    out += section(&config.anchors.masks()[i]);
  }
  return out;
}

inline std::string anchors_csv(const AnchorSet& anchors) {
  std::string s = "width,height\n";
  for (const auto& a : anchors.anchors()) s += fmt::sig(a.width) + ',' + fmt::sig(a.height) + '\n';
  return s;
}

inline AnchorSet parse_anchors_csv(std::string_view content, const std::string& source = "anchors") {
  std::vector<Anchor> out;
  auto all = text::lines(content);
  bool header = false;
  for (std::size_t n = 0; n < all.size(); ++n) {
    auto line = text::trim(all[n]);
    if (line.empty()) continue;
    auto cols = text::split(line, ',');
    for (auto& c : cols) c = text::trim(c);
    if (!header) {
      header = true;
      if (cols.size() == 2 && cols[0] == "width" && cols[1] == "height") continue;
      throw ParseError(source, n + 1, "expected header 'width,height'");
    }
    if (cols.size() != 2) throw ParseError(source, n + 1, "expected 2 columns");
    auto w = text::parse_real(cols[0]);
    auto h = text::parse_real(cols[1]);
    if (!w || !h || *w <= 0 || *h <= 0) throw ParseError(source, n + 1, "anchor dimensions must be positive numbers");
    out.push_back({*w, *h});
  }
  return AnchorSet(std::move(out));
}

inline std::string coverage_csv(const AnchorSet& anchors, const CoverageDiagnostic& diag, const std::string& method) {
  std::string s = "method,anchor_index,width,height,assigned_boxes\n";
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    s += method + ',' + std::to_string(i) + ',' + fmt::sig(anchors[i].width) + ',' + fmt::sig(anchors[i].height) +
         ',' + std::to_string(diag.per_anchor_assignment_counts[i]) + '\n';
  }
  return s;
}

}  // namespace headcount
