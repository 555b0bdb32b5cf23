#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "headcount/annotations.hpp"
#include "headcount/core.hpp"
#include "headcount/geometry.hpp"

namespace headcount {

struct ImageStats {
  std::string image_id;
  std::size_t head_count = 0;
  double total_box_area = 0.0;
  double coverage_fraction = 0.0;
  bool dims_inferred = false;

  bool operator==(const ImageStats&) const = default;
};

struct Quantiles {
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;

  bool operator==(const Quantiles&) const = default;
};

struct DatasetStats {
  std::vector<ImageStats> per_image;
  std::size_t total_heads = 0;
  double mean_count = 0.0;
  double sd_count = 0.0;  // sample standard deviation (n - 1)
  Quantiles count_quantiles;
  Quantiles coverage_quantiles;

  bool operator==(const DatasetStats&) const = default;
};

/// Quantile of sorted data with linear interpolation between order
/// statistics (position p * (n - 1)).
template <typename T>
double quantile_sorted(std::span<const T> sorted, double p) {
  if (sorted.empty()) throw Error("quantile of empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  const double a = static_cast<double>(sorted[lo]);
  const double b = static_cast<double>(sorted[hi]);
  return frac == 0.0 ? a : a + (b - a) * frac;
}

inline Quantiles five_number_summary(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::span<const double> s(values);
  return {s.front(), quantile_sorted(s, 0.25), quantile_sorted(s, 0.5), quantile_sorted(s, 0.75), s.back()};
}

inline ImageStats image_stats(const ImageAnnotations& image) {
  ImageStats st;
  st.image_id = image.image_id;
  st.head_count = image.boxes.size();
  for (const auto& g : image.boxes) st.total_box_area += g.box.area();

  double w = 0.0, h = 0.0;
  if (image.width && image.height) {
    w = *image.width;
    h = *image.height;
    st.dims_inferred = image.dims_inferred;
  } else {
    ImageAnnotations tmp = image;
    infer_dimensions(tmp);
    w = *tmp.width;
    h = *tmp.height;
    st.dims_inferred = true;
  }
  // Without boxes and without known dimensions nothing is covered.
  st.coverage_fraction = (w > 0 && h > 0) ? st.total_box_area / (w * h) : 0.0;
  return st;
}

/// Per-image head counts and coverage, plus summaries across images.
inline DatasetStats compute_stats(const Dataset& dataset) {
  if (dataset.empty()) throw Error("cannot compute statistics of an empty dataset");
  DatasetStats out;
  std::vector<double> counts, coverages;
  for (const auto& [id, img] : dataset.images()) {
    out.per_image.push_back(image_stats(img));
    out.total_heads += out.per_image.back().head_count;
    counts.push_back(static_cast<double>(out.per_image.back().head_count));
    coverages.push_back(out.per_image.back().coverage_fraction);
  }
  const double n = static_cast<double>(counts.size());
  out.mean_count = static_cast<double>(out.total_heads) / n;
  if (counts.size() > 1) {
    double ss = 0.0;
    for (double c : counts) ss += (c - out.mean_count) * (c - out.mean_count);
    out.sd_count = std::sqrt(ss / (n - 1.0));
  }
  out.count_quantiles = five_number_summary(std::move(counts));
  out.coverage_quantiles = five_number_summary(std::move(coverages));
  return out;
}

/// One BoxDims per ground-truth box, in dataset (image id, file) order.
inline std::vector<BoxDims> extract_dims(const Dataset& dataset) {
  std::vector<BoxDims> dims;
  dims.reserve(dataset.box_count());
  for (const auto& [id, img] : dataset.images()) {
    for (const auto& g : img.boxes) dims.push_back(dims_of(g.box));
  }
  return dims;
}

struct OutlierFlag {
  std::string image_id;
  std::string reason;

  bool operator==(const OutlierFlag&) const = default;
};

/// Images whose count or coverage falls strictly below the sanity bounds.
/// An image violating both rules appears twice.
inline std::vector<OutlierFlag> flag_outliers(const DatasetStats& stats, std::size_t min_count = 3,
                                              double min_coverage = 0.05) {
  std::vector<OutlierFlag> flags;
  for (const auto& s : stats.per_image) {
    if (s.head_count < min_count) {
      flags.push_back({s.image_id, "head count below " + std::to_string(min_count)});
    }
    if (s.coverage_fraction < min_coverage) {
      flags.push_back({s.image_id, "coverage below " + fmt::sig(min_coverage * 100.0) + "%"});
    }
  }
  return flags;
}

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins over [min, max]; the last bin is closed on the right.
/// A sample with a single distinct value yields one zero-width bin.
inline std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins) {
  if (values.empty()) return {};
  if (bins == 0) throw Error("histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (lo == hi) return {{lo, hi, values.size()}};
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<HistogramBin> out(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    out[i].left = lo + width * static_cast<double>(i);
    out[i].right = i + 1 == bins ? hi : lo + width * static_cast<double>(i + 1);
  }
  for (double v : values) {
    auto i = static_cast<std::size_t>((v - lo) / width);
    if (i >= bins) i = bins - 1;
    // Guard against rounding at the bin edges.
    while (i > 0 && v < out[i].left) --i;
    while (i + 1 < bins && v >= out[i + 1].left) ++i;
    ++out[i].count;
  }
  return out;
}

// CSV writers.

inline std::string stats_csv(const DatasetStats& stats) {
  std::string s = "image_id,head_count,total_box_area,coverage_fraction,dims_inferred\n";
  for (const auto& r : stats.per_image) {
    s += r.image_id + ',' + std::to_string(r.head_count) + ',' + fmt::sig(r.total_box_area) + ',' +
         fmt::sig(r.coverage_fraction) + ',' + (r.dims_inferred ? "true" : "false") + '\n';
  }
  auto q = [](const Quantiles& x) {
    return fmt::sig(x.min) + ',' + fmt::sig(x.q25) + ',' + fmt::sig(x.median) + ',' + fmt::sig(x.q75) + ',' +
           fmt::sig(x.max);
  };
  s += "\n# summary\n";
  s += "statistic,value\n";
  s += "images," + std::to_string(stats.per_image.size()) + '\n';
  s += "total_heads," + std::to_string(stats.total_heads) + '\n';
  s += "mean_count," + fmt::sig(stats.mean_count) + '\n';
  s += "sd_count," + fmt::sig(stats.sd_count) + '\n';
  s += "\nquantity,min,q25,median,q75,max\n";
  s += "head_count," + q(stats.count_quantiles) + '\n';
  s += "coverage_fraction," + q(stats.coverage_quantiles) + '\n';
  return s;
}

inline std::string histogram_csv(std::span<const HistogramBin> bins) {
  std::string s = "bin_left,bin_right,count\n";
  for (const auto& b : bins) s += fmt::sig(b.left) + ',' + fmt::sig(b.right) + ',' + std::to_string(b.count) + '\n';
  return s;
}

inline std::string outliers_csv(std::span<const OutlierFlag> flags) {
  std::string s = "image_id,reason\n";
  for (const auto& f : flags) s += f.image_id + ',' + f.reason + '\n';
  return s;
}

}  // namespace headcount
