#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "headcount/annotations.hpp"
#include "headcount/core.hpp"
#include "headcount/random.hpp"

namespace headcount {

struct SynthConfig {
  std::size_t n_images = 300;
  double image_width = 1200.0;
  double image_height = 1200.0;
  double count_mean = 103.0;
  double count_sd = 25.0;
  double min_width = 8.0;
  double max_width = 90.0;
  double line_slope = 1.0;
  double line_intercept = 0.0;
  double residual_sd = 3.0;
  std::uint64_t seed = 42;
  std::string class_name = "head";
};

struct DetectorNoise {
  double miss_rate = 0.0;
  double false_positive_rate = 0.0;  // expected spurious boxes per image
  double jitter_sd = 0.0;            // pixels, per edge
  double tp_confidence_low = 0.6;
  double tp_confidence_high = 1.0;
  double fp_confidence_low = 0.05;
  double fp_confidence_high = 0.6;
  std::uint64_t seed = 7;
};

inline void validate(const SynthConfig& c) {
  if (c.n_images == 0) throw Error("n_images must be at least 1");
  if (!(c.count_mean > 0.0)) throw Error("count_mean must be positive");
  if (!(c.count_sd >= 0.0)) throw Error("count_sd must be non-negative");
  if (!(c.min_width > 0.0) || !(c.max_width >= c.min_width)) throw Error("width range must be positive and ordered");
  if (!(c.residual_sd >= 0.0)) throw Error("residual_sd must be non-negative");
  if (!(c.image_width > 0.0) || !(c.image_height > 0.0)) throw Error("image dimensions must be positive");
  const double max_h = std::max(c.line_slope * c.max_width, c.line_slope * c.min_width) + c.line_intercept;
  if (std::round(c.max_width) > c.image_width || std::round(std::max(1.0, max_h)) > c.image_height) {
    throw Error("image too small to place a maximal box");
  }
}

inline void validate(const DetectorNoise& n) {
  if (!(n.miss_rate >= 0.0 && n.miss_rate <= 1.0)) throw Error("miss_rate must be in [0,1]");
  if (!(n.false_positive_rate >= 0.0)) throw Error("false_positive_rate must be non-negative");
  if (!(n.jitter_sd >= 0.0)) throw Error("jitter_sd must be non-negative");
  auto range_ok = [](double lo, double hi) { return lo >= 0.0 && hi <= 1.0 && lo <= hi; };
  if (!range_ok(n.tp_confidence_low, n.tp_confidence_high)) throw Error("tp confidence range must be ordered in [0,1]");
  if (!range_ok(n.fp_confidence_low, n.fp_confidence_high)) throw Error("fp confidence range must be ordered in [0,1]");
}

inline std::string synth_image_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%04zu", index);
  return buf;
}

/// Field-style corpus: per-image counts from a truncated normal, widths
/// uniform in the width range, heights on a noisy line, integer pixel
/// boxes placed uniformly and fully inside the image. Image i draws from
/// its own substream of `seed`.
inline Dataset generate_dataset(const SynthConfig& config) {
  validate(config);
  Dataset ds;
  for (std::size_t i = 0; i < config.n_images; ++i) {
    Rng rng = Rng::substream(config.seed, i);
    ImageAnnotations img;
    img.image_id = synth_image_id(i);
    img.width = config.image_width;
    img.height = config.image_height;
    const double drawn = config.count_sd > 0.0 ? rng.normal(config.count_mean, config.count_sd) : config.count_mean;
    const auto count = static_cast<std::size_t>(std::max(0.0, std::round(drawn)));
    img.boxes.reserve(count);
    for (std::size_t b = 0; b < count; ++b) {
      const double w = std::max(1.0, std::round(rng.uniform(config.min_width, config.max_width)));
      double h = config.line_slope * w + config.line_intercept;
      if (config.residual_sd > 0.0) h += rng.normal(0.0, config.residual_sd);
      h = std::clamp(std::round(h), 1.0, std::floor(config.image_height));
      const double left = static_cast<double>(rng.index(static_cast<std::uint64_t>(config.image_width - w) + 1));
      const double top = static_cast<double>(rng.index(static_cast<std::uint64_t>(config.image_height - h) + 1));
      img.boxes.push_back({config.class_name, {left, top, left + w, top + h}});
    }
    ds.add(std::move(img));
  }
  return ds;
}

namespace detail {

inline double round_to_hundredths(double v) { return std::round(v * 100.0) / 100.0; }
inline double round_confidence(double v) { return std::clamp(std::round(v * 1e6) / 1e6, 0.0, 1.0); }

}  // namespace detail

/// Imperfect detector: drops boxes, jitters edges, adds spurious boxes.
///
/// Kept boxes have each edge shifted by Normal(0, jitter_sd), then clamped to
/// the image and to a one-pixel minimum extent. Spurious boxes take the
/// dimensions of a random ground-truth box from the whole corpus. Image i
/// (in id order) draws from its own substream of `noise.seed`.
inline std::vector<ImageDetections> simulate_detector(const Dataset& gt, const DetectorNoise& noise) {
  validate(noise);
  std::vector<BoxDims> pool;
  for (const auto& [id, img] : gt.images()) {
    for (const auto& g : img.boxes) pool.push_back(dims_of(g.box));
  }

  std::vector<ImageDetections> out;
  std::size_t index = 0;
  for (const auto& [id, img] : gt.images()) {
    Rng rng = Rng::substream(noise.seed, index++);
    ImageDetections dets;
    dets.image_id = id;
    double bound_w = img.width.value_or(0.0), bound_h = img.height.value_or(0.0);
    for (const auto& g : img.boxes) {
      bound_w = std::max(bound_w, g.box.right);
      bound_h = std::max(bound_h, g.box.bottom);
    }

    for (const auto& g : img.boxes) {
      if (rng.uniform() < noise.miss_rate) continue;
      BoundingBox b = g.box;
      if (noise.jitter_sd > 0.0) {
        b.left = detail::round_to_hundredths(b.left + rng.normal(0.0, noise.jitter_sd));
        b.top = detail::round_to_hundredths(b.top + rng.normal(0.0, noise.jitter_sd));
        b.right = detail::round_to_hundredths(b.right + rng.normal(0.0, noise.jitter_sd));
        b.bottom = detail::round_to_hundredths(b.bottom + rng.normal(0.0, noise.jitter_sd));
        if (b.right < b.left) std::swap(b.left, b.right);
        if (b.bottom < b.top) std::swap(b.top, b.bottom);
        b.left = std::clamp(b.left, 0.0, std::max(0.0, bound_w - 1.0));
        b.top = std::clamp(b.top, 0.0, std::max(0.0, bound_h - 1.0));
        b.right = std::clamp(b.right, b.left + 1.0, std::max(b.left + 1.0, bound_w));
        b.bottom = std::clamp(b.bottom, b.top + 1.0, std::max(b.top + 1.0, bound_h));
      }
      const double conf =
          detail::round_confidence(rng.uniform(noise.tp_confidence_low, noise.tp_confidence_high));
      dets.detections.push_back({g.class_name, conf, b});
    }

    const std::uint64_t spurious = noise.false_positive_rate > 0.0 ? rng.poisson(noise.false_positive_rate) : 0;
    const std::string cls = img.boxes.empty() ? std::string("object") : img.boxes.front().class_name;
    for (std::uint64_t s = 0; s < spurious && !pool.empty() && bound_w >= 1.0 && bound_h >= 1.0; ++s) {
      const BoxDims d = pool[rng.index(pool.size())];
      const double w = std::min(d.width, bound_w), h = std::min(d.height, bound_h);
      const double left = std::floor(rng.uniform(0.0, std::max(0.0, bound_w - w)));
      const double top = std::floor(rng.uniform(0.0, std::max(0.0, bound_h - h)));
      const double conf =
          detail::round_confidence(rng.uniform(noise.fp_confidence_low, noise.fp_confidence_high));
      dets.detections.push_back({cls, conf, {left, top, left + w, top + h}});
    }
    out.push_back(std::move(dets));
  }
  return out;
}

}  // namespace headcount
