#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "headcount/anchorlab.hpp"
#include "headcount/random.hpp"
#include "oracles.hpp"

using namespace headcount;

namespace {

std::vector<BoxDims> two_clusters() {
  std::vector<BoxDims> dims;
  for (int i = 0; i < 50; ++i) dims.push_back({10, 10});
  for (int i = 0; i < 50; ++i) dims.push_back({80, 80});
  return dims;
}

std::vector<BoxDims> random_dims(Rng& rng, std::size_t n, double lo = 4, double hi = 90) {
  std::vector<BoxDims> dims;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::round(rng.uniform(lo, hi));
    dims.push_back({w, std::max(1.0, std::round(w * rng.uniform(0.7, 1.3)))});
  }
  return dims;
}

const std::vector<Anchor> kReference = {{10, 10}, {16, 16}, {19, 19}, {16, 24}, {24, 20}, {23, 24}, {28, 27},
                                     {23, 35}, {32, 32}, {38, 39}, {50, 50}, {60, 60}, {80, 80}};

}  // namespace

TEST(CenteredIou, Examples) {
  EXPECT_DOUBLE_EQ(centered_iou(BoxDims{10, 10}, Anchor{10, 10}), 1.0);
  // Oracle values first, then the analytic form against them.
  EXPECT_DOUBLE_EQ(oracle::raster_centered_iou(10, 10, 20, 20), 0.25);
  EXPECT_DOUBLE_EQ(oracle::raster_centered_iou(16, 24, 24, 20), 320.0 / 544.0);
  EXPECT_DOUBLE_EQ(centered_iou(BoxDims{10, 10}, Anchor{20, 20}), 0.25);
  EXPECT_NEAR(centered_iou(BoxDims{16, 24}, Anchor{24, 20}), 0.5882352941, 1e-9);
}

TEST(CenteredIouProperty, SymmetricAndMatchesRaster) {
  Rng rng(1);
  for (int i = 0; i < 300; ++i) {
    const long wa = 1 + static_cast<long>(rng.index(40)), ha = 1 + static_cast<long>(rng.index(40));
    const long wb = 1 + static_cast<long>(rng.index(40)), hb = 1 + static_cast<long>(rng.index(40));
    const BoxDims a{double(wa), double(ha)};
    const Anchor b{double(wb), double(hb)};
    const double v = centered_iou(a, b);
    EXPECT_NEAR(v, oracle::raster_centered_iou(wa, ha, wb, hb), 1e-9);
    EXPECT_DOUBLE_EQ(v, centered_iou(b, a));
    EXPECT_EQ(v == 1.0, wa == wb && ha == hb);
  }
}

TEST(AnchorSet, SortsByAreaAndDropsDuplicates) {
  AnchorSet s({{80, 80}, {10, 10}, {24, 20}, {16, 24}, {10, 10}});
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0], (Anchor{10, 10}));
  EXPECT_EQ(s[1], (Anchor{16, 24}));
  EXPECT_EQ(s[2], (Anchor{24, 20}));
  EXPECT_EQ(s[3], (Anchor{80, 80}));
  EXPECT_THROW(AnchorSet({{0, 3}}), Error);
  // Table order is already area order.
  EXPECT_EQ(AnchorSet(kReference).anchors(), kReference);
}

TEST(KMeans, TwoDuplicateClustersRecoveredExactly) {
  const auto dims = two_clusters();
  for (auto d : {KMeansDistance::euclidean, KMeansDistance::one_minus_iou}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto a = kmeans_anchors(dims, 2, d, seed);
      ASSERT_EQ(a.size(), 2u);
      EXPECT_EQ(a[0], (Anchor{10, 10}));
      EXPECT_EQ(a[1], (Anchor{80, 80}));
    }
  }
}

TEST(KMeans, SingleClusterIsCoordinateMean) {
  const std::vector<BoxDims> dims{{10, 20}, {20, 40}, {33, 12}};
  auto a = kmeans_anchors(dims, 1, KMeansDistance::euclidean, 3);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_DOUBLE_EQ(a[0].width, 21.0);
  EXPECT_DOUBLE_EQ(a[0].height, 24.0);
}

TEST(KMeans, DeterministicGivenSeed) {
  Rng rng(9);
  const auto dims = random_dims(rng, 400);
  for (auto d : {KMeansDistance::euclidean, KMeansDistance::one_minus_iou}) {
    EXPECT_EQ(kmeans_anchors(dims, 9, d, 77), kmeans_anchors(dims, 9, d, 77));
  }
}

TEST(KMeans, CentroidsRoundedToHundredths) {
  Rng rng(10);
  const auto dims = random_dims(rng, 200);
  auto fit = kmeans_fit(dims, {5, KMeansDistance::euclidean, 1, 1000});
  for (const auto& a : fit.anchors.anchors()) {
    EXPECT_NEAR(a.width * 100, std::round(a.width * 100), 1e-6);
    EXPECT_NEAR(a.height * 100, std::round(a.height * 100), 1e-6);
  }
  EXPECT_TRUE(fit.converged);
}

TEST(KMeans, Errors) {
  const std::vector<BoxDims> dims{{10, 10}, {10, 10}, {20, 20}};
  EXPECT_THROW(kmeans_anchors(dims, 0), Error);
  EXPECT_THROW(kmeans_anchors(dims, 3), Error);  // only 2 distinct points
  EXPECT_THROW(kmeans_anchors(dims, 4), Error);
  EXPECT_NO_THROW(kmeans_anchors(dims, 2));
}

TEST(KMeansProperty, ObjectiveNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const auto dims = random_dims(rng, 150 + rng.index(200));
    for (auto d : {KMeansDistance::euclidean, KMeansDistance::one_minus_iou}) {
      auto fit = kmeans_fit(dims, {1 + rng.index(9), d, seed, 1000});
      for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
        EXPECT_LE(fit.objective_trace[i], fit.objective_trace[i - 1] * (1 + 1e-12) + 1e-12);
      }
    }
  }
}

TEST(LineFit, ZeroResidualLine) {
  std::vector<BoxDims> dims;
  for (int w = 10; w <= 100; w += 10) dims.push_back({double(w), double(w)});
  auto res = linefit_fit(dims, {9, Anchor{10, 10}, 13, 10});
  EXPECT_NEAR(res.line.slope, 1.0, 1e-12);
  EXPECT_NEAR(res.line.intercept, 0.0, 1e-9);
  ASSERT_EQ(res.line_samples.size(), 9u);
  for (const auto& a : res.line_samples) EXPECT_EQ(a.width, a.height);
  // q = i/10 over 10 points lands on 10 + 9i.
  EXPECT_EQ(res.line_samples.front(), (Anchor{19, 19}));
  EXPECT_EQ(res.line_samples.back(), (Anchor{91, 91}));
  EXPECT_EQ(res.anchors.size(), 13u);
  EXPECT_EQ(res.anchors[0], (Anchor{10, 10}));
  EXPECT_EQ(std::count(res.anchors.anchors().begin(), res.anchors.anchors().end(), Anchor{10, 10}), 1);
}

TEST(LineFit, FloorNotDuplicated) {
  // Samples already include (10,10): the floor is not below it and is not added.
  std::vector<BoxDims> dims;
  for (int i = 0; i < 50; ++i) dims.push_back({10, 10});
  for (int i = 0; i < 50; ++i) dims.push_back({30, 30});
  auto res = linefit_fit(dims, {9, Anchor{10, 10}, 13, 10});
  EXPECT_FALSE(res.floor_added.has_value());
  const auto& v = res.anchors.anchors();
  EXPECT_EQ(std::count(v.begin(), v.end(), Anchor{10, 10}), 1);
}

TEST(LineFit, VarianceExtraLandsInTopVarianceBin) {
  // Heights exactly on h = w for small widths and scattered for w >= 80.
  Rng rng(4);
  std::vector<BoxDims> dims;
  for (int i = 0; i < 400; ++i) {
    const double w = 10 + static_cast<double>(rng.index(91));
    const double noise = w >= 80 ? std::round(rng.normal(0, 12)) : 0.0;
    dims.push_back({w, std::max(1.0, w + noise)});
  }
  auto res = linefit_fit(dims, {9, Anchor{10, 10}, 13, 10});

  // Direct per-bin variance of residuals about the fitted line.
  auto sorted = dims;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](auto& a, auto& b) { return a.width != b.width ? a.width < b.width : a.height < b.height; });
  double top_var = -1, top_lo = 0, top_hi = 0;
  for (std::size_t b = 0; b < 10; ++b) {
    const std::size_t lo = b * sorted.size() / 10, hi = (b + 1) * sorted.size() / 10;
    std::vector<double> r;
    for (std::size_t i = lo; i < hi; ++i) {
      r.push_back(sorted[i].height - (res.line.slope * sorted[i].width + res.line.intercept));
    }
    const double m = std::accumulate(r.begin(), r.end(), 0.0) / double(r.size());
    double v = 0;
    for (double x : r) v += (x - m) * (x - m);
    v /= double(r.size());
    if (v > top_var) top_var = v, top_lo = sorted[lo].width, top_hi = sorted[hi - 1].width;
  }
  EXPECT_GE(top_lo, 80);
  ASSERT_FALSE(res.variance_extras.empty());
  const bool hit = std::any_of(res.variance_extras.begin(), res.variance_extras.end(), [&](const Anchor& a) {
    return a.width >= std::floor(top_lo) && a.width <= std::ceil(top_hi);
  });
  EXPECT_TRUE(hit);
  EXPECT_EQ(res.anchors.size(), 13u);
}

TEST(LineFit, Errors) {
  const std::vector<BoxDims> same_width{{10, 5}, {10, 9}, {10, 20}};
  EXPECT_THROW(linefit_anchors(same_width), Error);
  const std::vector<BoxDims> ok{{10, 10}, {20, 20}};
  EXPECT_THROW(linefit_anchors(ok, {9, Anchor{10, 10}, 9, 10}), Error);  // n_total < n_line + 1
}

TEST(LineFitProperty, FloorCoversSmallBoxes) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(500 + seed);
    auto dims = random_dims(rng, 300, 3, 90);
    const LineFitOptions with_floor{9, Anchor{10, 10}, 13, 10};
    const LineFitOptions floorless{9, std::nullopt, 12, 10};
    auto a = linefit_fit(dims, with_floor);
    auto b = linefit_fit(dims, floorless);
    double smallest_sample = INFINITY;
    for (const auto& s : a.line_samples) smallest_sample = std::min(smallest_sample, s.area());
    const bool has_small_box =
        std::any_of(dims.begin(), dims.end(), [&](const BoxDims& d) { return d.area() < smallest_sample; });
    if (!has_small_box) continue;
    EXPECT_TRUE(std::any_of(a.anchors.anchors().begin(), a.anchors.anchors().end(),
                            [](const Anchor& x) { return x.area() <= 100.0; }));
    EXPECT_GE(coverage(dims, a.anchors).mean_best_iou, coverage(dims, b.anchors).mean_best_iou);
  }
}

TEST(Coverage, PerfectPriors) {
  const std::vector<BoxDims> dims{{10, 10}, {20, 30}, {10, 10}, {45, 40}};
  AnchorSet anchors({{10, 10}, {20, 30}, {45, 40}});
  auto c = coverage(dims, anchors);
  EXPECT_DOUBLE_EQ(c.mean_best_iou, 1.0);
  EXPECT_DOUBLE_EQ(c.recall_at_t, 1.0);
  EXPECT_EQ(c.per_anchor_assignment_counts, (std::vector<std::size_t>{2, 1, 1}));
}

TEST(Coverage, SingleAnchor) {
  const std::vector<BoxDims> dims{{10, 10}, {20, 20}};
  auto c = coverage(dims, AnchorSet({{10, 10}}));
  EXPECT_DOUBLE_EQ(c.mean_best_iou, 0.625);
  EXPECT_DOUBLE_EQ(c.recall_at_t, 0.5);
}

TEST(CoverageProperty, AddingAnchorNeverHurts) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto dims = random_dims(rng, 60);
    std::vector<Anchor> anchors;
    double prev = 0.0;
    for (int k = 0; k < 8; ++k) {
      anchors.push_back({1 + std::round(rng.uniform(1, 90)), 1 + std::round(rng.uniform(1, 90))});
      const auto c = coverage(dims, AnchorSet(anchors));
      std::size_t total = 0;
      for (auto n : c.per_anchor_assignment_counts) total += n;
      EXPECT_EQ(total, dims.size());
      EXPECT_GE(c.mean_best_iou, prev - 1e-15);
      prev = c.mean_best_iou;
    }
  }
}

TEST(AssignMasks, ContiguousPartitions) {
  auto a13 = assign_masks(AnchorSet(kReference), {3, 4, 6});
  EXPECT_EQ(a13.masks(), (std::vector<std::vector<std::size_t>>{{0, 1, 2}, {3, 4, 5, 6}, {7, 8, 9, 10, 11, 12}}));
  std::vector<Anchor> nine(kReference.begin(), kReference.begin() + 9);
  auto a9 = assign_masks(AnchorSet(nine), {3, 3, 3});
  EXPECT_EQ(a9.masks(), (std::vector<std::vector<std::size_t>>{{0, 1, 2}, {3, 4, 5}, {6, 7, 8}}));
  EXPECT_THROW(assign_masks(AnchorSet(kReference), {3, 4, 5}), Error);
}

TEST(AssignMasksProperty, EveryIndexExactlyOnce) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> sizes;
    std::size_t total = 0;
    const auto layers = 1 + rng.index(5);
    for (std::uint64_t l = 0; l < layers; ++l) sizes.push_back(rng.index(5)), total += sizes.back();
    std::vector<Anchor> a;
    for (std::size_t i = 0; i < total; ++i) a.push_back({double(i + 1), double(i + 1)});
    auto set = assign_masks(AnchorSet(a), sizes);
    std::vector<int> seen(total, 0);
    for (const auto& m : set.masks()) {
      for (auto i : m) ++seen[i];
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  }
}

TEST(Darknet, SingleAnchorFragment) {
  DarknetConfigFragment f;
  f.anchors = AnchorSet({{10, 10}});
  const std::string text = emit_darknet_fragment(f);
  EXPECT_NE(text.find("anchors = 10,10\n"), std::string::npos);
  EXPECT_NE(text.find("num = 1\n"), std::string::npos);
  EXPECT_EQ(text.find("mask"), std::string::npos);
}

TEST(Darknet, NonIntegralAnchorsKeepFraction) {
  DarknetConfigFragment f;
  f.anchors = AnchorSet({{9.32, 5.48}, {12, 12}});
  EXPECT_NE(emit_darknet_fragment(f).find("anchors = 9.32,5.48, 12,12\n"), std::string::npos);
}

// The reader in oracles.hpp parses the fragment back into a configuration.
TEST(Darknet, ParseBackReproducesConfig) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Anchor> anchors;
    const auto n = 3 + rng.index(12);
    for (std::uint64_t i = 0; i < n; ++i) {
      anchors.push_back({std::round(rng.uniform(1, 200) * 4) / 4, std::round(rng.uniform(1, 200))});
    }
    DarknetConfigFragment f;
    f.anchors = AnchorSet(anchors);
    const std::size_t m = f.anchors.size();
    f.anchors = assign_masks(f.anchors, {m / 3, m / 3, m - 2 * (m / 3)});
    f.classes = 1 + static_cast<int>(rng.index(5));
    f.jitter = std::round(rng.uniform() * 100) / 100;
    f.ignore_threshold = 0.5 + std::round(rng.uniform() * 40) / 100;

    const auto sections = oracle::read_cfg(emit_darknet_fragment(f));
    ASSERT_EQ(sections.size(), 3u);
    for (std::size_t s = 0; s < 3; ++s) {
      const auto& v = sections[s].values;
      EXPECT_EQ(sections[s].name, "yolo");
      const auto mask = oracle::numbers(v.at("mask"));
      ASSERT_EQ(mask.size(), f.anchors.masks()[s].size());
      for (std::size_t i = 0; i < mask.size(); ++i) EXPECT_EQ(mask[i], double(f.anchors.masks()[s][i]));
      const auto nums = oracle::numbers(v.at("anchors"));
      ASSERT_EQ(nums.size(), 2 * m);
      std::vector<Anchor> back;
      for (std::size_t i = 0; i < m; ++i) back.push_back({nums[2 * i], nums[2 * i + 1]});
      EXPECT_EQ(back, f.anchors.anchors());
      EXPECT_EQ(std::stoi(v.at("classes")), f.classes);
      EXPECT_EQ(std::stoul(v.at("num")), m);
      EXPECT_EQ(std::stod(v.at("jitter")), f.jitter);
      EXPECT_EQ(std::stod(v.at("ignore_thresh")), f.ignore_threshold);
      EXPECT_EQ(std::stod(v.at("truth_thresh")), f.truth_threshold);
      EXPECT_EQ(std::stod(v.at("random")), f.random);
    }
  }
}

TEST(AnchorsCsv, RoundTrip) {
  AnchorSet a(kReference);
  EXPECT_EQ(parse_anchors_csv(anchors_csv(a)), a);
  EXPECT_THROW(parse_anchors_csv("w,h\n1,2\n"), ParseError);
}
