#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "headcount/anchorlab.hpp"
#include "headcount/annotations.hpp"
#include "headcount/core.hpp"
#include "headcount/datastats.hpp"
#include "headcount/evalcore.hpp"
#include "headcount/io.hpp"
#include "headcount/svg.hpp"
#include "headcount/synthgen.hpp"

namespace headcount::cli {

inline constexpr const char* kVersion = "1.0.0";

namespace fs = std::filesystem;

/// Bad flag values or combinations; exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key-value record written next to every output set.
struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<std::string> inputs;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  std::string timestamp;

  std::string render() const {
    std::string s;
    s += "command = " + command + '\n';
    s += "version = " + std::string(kVersion) + '\n';
    for (const auto& [k, v] : parameters) s += "param." + k + " = " + v + '\n';
    for (std::size_t i = 0; i < inputs.size(); ++i) s += "input." + std::to_string(i) + " = " + inputs[i] + '\n';
    for (const auto& [k, v] : seeds) s += "seed." + k + " = " + std::to_string(v) + '\n';
    s += "timestamp = " + timestamp + '\n';
    return s;
  }
};

namespace detail {

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string option_value(const CLI::Option* opt) {
  if (opt->count() > 0) {
    std::string v;
    for (const auto& r : opt->results()) v += (v.empty() ? "" : ",") + r;
    return v;
  }
  if (opt->get_type_size() == 0) return "false";
  return opt->get_default_str();
}

/// Every option of the subcommand and the global options, defaults filled in.
inline std::vector<std::pair<std::string, std::string>> resolved_parameters(const CLI::App& root,
                                                                            const CLI::App& sub) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const CLI::App* app : {&root, &sub}) {
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "help" || name == "quiet" || name == "version") continue;
      out.emplace_back(name, option_value(opt));
    }
  }
  return out;
}

inline std::string safe_filename(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? std::string("_") : out;
}

inline Anchor parse_extent(const std::string& s) {
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) throw UsageError("expected WxH, got '" + s + "'");
  auto w = text::parse_real(std::string_view(s).substr(0, x));
  auto h = text::parse_real(std::string_view(s).substr(x + 1));
  if (!w || !h || *w <= 0 || *h <= 0) throw UsageError("expected positive WxH, got '" + s + "'");
  return {*w, *h};
}

inline std::pair<double, double> parse_range(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw UsageError("expected LOW,HIGH, got '" + s + "'");
  auto lo = text::parse_real(std::string_view(s).substr(0, comma));
  auto hi = text::parse_real(std::string_view(s).substr(comma + 1));
  if (!lo || !hi) throw UsageError("expected LOW,HIGH, got '" + s + "'");
  return {*lo, *hi};
}

/// Default layer split: 3/4/6 for thirteen anchors, otherwise three
/// near-equal contiguous layers with the remainder on the last.
inline std::vector<std::size_t> default_layers(std::size_t n) {
  if (n == 13) return {3, 4, 6};
  if (n < 3) return {n};
  const std::size_t base = n / 3;
  return {base, base, n - 2 * base};
}

inline void remove_stale_txt(const fs::path& dir, const std::set<std::string>& keep) {
  if (!fs::is_directory(dir)) return;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt" &&
        !keep.contains(entry.path().filename().string())) {
      fs::remove(entry.path());
    }
  }
}

inline std::string anchor_list(const AnchorSet& a) {
  std::string s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) s += ' ';
    s += fmt::sig(a[i].width) + 'x' + fmt::sig(a[i].height);
  }
  return s;
}

}  // namespace detail

struct GlobalOptions {
  std::string out = "out";
  std::uint64_t seed = 42;
  bool quiet = false;
};

struct StatsOptions {
  std::string gt;
  std::string manifest;
  std::size_t min_count = 3;
  double min_coverage = 0.05;
  std::size_t bins = 20;
};

struct AnchorsOptions {
  std::string gt;
  std::string manifest;
  std::string method = "linefit";
  std::size_t k = 9;
  std::string distance = "iou";
  std::size_t n_line = 9;
  std::size_t n_total = 13;
  std::string floor = "10x10";
  std::size_t variance_bins = 10;
  double threshold = 0.5;
  std::vector<std::size_t> layers;
  bool compare = false;
  bool emit_darknet = false;
  std::string anchors_file;
  int classes = 1;
  double jitter = 0.3;
  double ignore_thresh = 0.7;
  double truth_thresh = 1.0;
  double random = 1.0;
};

struct EvalCliOptions {
  std::string gt;
  std::string pred;
  std::string manifest;
  double iou = 0.70;
  double conf = 0.5;
  std::string r2 = "correlation";
  std::string interp = "all-point";
};

struct SynthCliOptions {
  SynthConfig config;
  bool simulate = false;
  double miss_rate = 0.1;
  double fp_rate = 2.0;
  double jitter = 1.5;
  std::string tp_conf = "0.6,1.0";
  std::string fp_conf = "0.05,0.6";
  std::optional<std::uint64_t> detector_seed;
};

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int cmd_stats(const GlobalOptions& g, const StatsOptions& o, RunManifest manifest) {
    const Dataset ds = load(o.gt, o.manifest);
    const DatasetStats st = compute_stats(ds);
    const auto flags = flag_outliers(st, o.min_count, o.min_coverage);
    std::vector<double> counts, cover;
    for (const auto& r : st.per_image) {
      counts.push_back(static_cast<double>(r.head_count));
      cover.push_back(r.coverage_fraction);
    }
    const auto count_bins = histogram(counts, o.bins);
    const auto cover_bins = histogram(cover, o.bins);

    const fs::path out = g.out;
    io::write_file_atomic(out / "stats.csv", stats_csv(st));
    io::write_file_atomic(out / "count_histogram.csv", histogram_csv(count_bins));
    io::write_file_atomic(out / "count_histogram.svg",
                          svg::histogram_chart(count_bins, "Objects per image", "boxes per image"));
    io::write_file_atomic(out / "coverage_histogram.csv", histogram_csv(cover_bins));
    io::write_file_atomic(out / "coverage_histogram.svg",
                          svg::histogram_chart(cover_bins, "Box coverage per image", "coverage fraction"));
    io::write_file_atomic(out / "outliers.csv", outliers_csv(flags));
    manifest.inputs = {o.gt};
    if (!o.manifest.empty()) manifest.inputs.push_back(o.manifest);
    io::write_file_atomic(out / "run_manifest.txt", manifest.render());

    if (!g.quiet) {
      out_ << "images " << st.per_image.size() << '\n';
      out_ << "total_heads " << st.total_heads << '\n';
      out_ << "mean_count " << fmt::fixed(st.mean_count, 4) << '\n';
      out_ << "sd_count " << fmt::fixed(st.sd_count, 4) << '\n';
      out_ << "outliers " << flags.size() << '\n';
    }
    return 0;
  }

  int cmd_anchors(const GlobalOptions& g, const AnchorsOptions& o, RunManifest manifest) {
    if (o.gt.empty() && o.anchors_file.empty()) throw UsageError("--gt is required unless --anchors-file is given");
    if (o.method != "kmeans" && o.method != "linefit") throw UsageError("--method must be kmeans or linefit");
    if (o.distance != "iou" && o.distance != "euclidean") throw UsageError("--distance must be iou or euclidean");
    std::optional<Anchor> floor;
    if (o.floor != "none") floor = detail::parse_extent(o.floor);
    if (o.n_total < o.n_line + 1) throw UsageError("--n-total must be at least --n-line + 1");

    std::vector<BoxDims> dims;
    if (!o.gt.empty()) dims = extract_dims(load(o.gt, o.manifest));
    if (!o.gt.empty() && dims.empty()) throw Error("corpus contains no boxes");

    const KMeansDistance dist = o.distance == "iou" ? KMeansDistance::one_minus_iou : KMeansDistance::euclidean;
    auto run_method = [&](const std::string& m) {
      if (m == "kmeans") return kmeans_anchors(dims, o.k, dist, g.seed);
      return linefit_anchors(dims, {o.n_line, floor, o.n_total, o.variance_bins});
    };

    struct Result {
      std::string method;
      AnchorSet anchors;
      std::optional<CoverageDiagnostic> diag;
    };
    std::vector<Result> results;
    if (!o.anchors_file.empty()) {
      results.push_back({"file", parse_anchors_csv(io::read_file(o.anchors_file), o.anchors_file), std::nullopt});
    } else {
      results.push_back({o.method, run_method(o.method), std::nullopt});
      if (o.compare) {
        const std::string other = o.method == "kmeans" ? "linefit" : "kmeans";
        results.push_back({other, run_method(other), std::nullopt});
      }
    }
    for (auto& r : results) {
      if (!dims.empty()) r.diag = coverage(dims, r.anchors, o.threshold);
    }

    const std::vector<std::size_t> layers = o.layers.empty() ? detail::default_layers(results[0].anchors.size()) : o.layers;
    const AnchorSet primary = assign_masks(results[0].anchors, layers);

    const fs::path out = g.out;
    io::write_file_atomic(out / "anchors.csv", anchors_csv(primary));
    for (std::size_t i = 1; i < results.size(); ++i) {
      io::write_file_atomic(out / ("anchors_" + results[i].method + ".csv"), anchors_csv(results[i].anchors));
    }
    if (!dims.empty()) {
      std::string cov = "method,anchor_count,mean_best_iou,recall_at_t,threshold_t\n";
      std::string assign;
      for (const auto& r : results) {
        cov += r.method + ',' + std::to_string(r.anchors.size()) + ',' + fmt::sig(r.diag->mean_best_iou) + ',' +
               fmt::sig(r.diag->recall_at_t) + ',' + fmt::sig(r.diag->threshold_t) + '\n';
        std::string block = coverage_csv(r.anchors, *r.diag, r.method);
        assign += assign.empty() ? block : block.substr(block.find('\n') + 1);
      }
      io::write_file_atomic(out / "coverage.csv", cov);
      io::write_file_atomic(out / "anchor_assignments.csv", assign);
    }

    std::string scatter = "series,width,height\n";
    svg::Chart chart("Box dimensions and anchors", "width (px)", "height (px)");
    if (!dims.empty()) {
      svg::Series s{"boxes", "#9a9a9a", {}, 1.5, false};
      for (const auto& d : dims) {
        scatter += "box," + fmt::sig(d.width) + ',' + fmt::sig(d.height) + '\n';
        s.points.push_back({d.width, d.height});
      }
      chart.add_series(std::move(s));
    }
    static const char* colors[] = {"#8b4513", "#1f5fbf", "#2e8b57"};
    for (std::size_t i = 0; i < results.size(); ++i) {
      svg::Series s{"anchors: " + results[i].method, colors[i % 3], {}, 4.0, false};
      for (const auto& a : results[i].anchors.anchors()) {
        scatter += "anchor_" + results[i].method + ',' + fmt::sig(a.width) + ',' + fmt::sig(a.height) + '\n';
        s.points.push_back({a.width, a.height});
      }
      chart.add_series(std::move(s));
    }
    chart.fit_ranges(true);
    io::write_file_atomic(out / "dims_anchors.csv", scatter);
    io::write_file_atomic(out / "dims_anchors.svg", chart.render());

    if (o.emit_darknet) {
      DarknetConfigFragment frag;
      frag.anchors = primary;
      frag.classes = o.classes;
      frag.jitter = o.jitter;
      frag.ignore_threshold = o.ignore_thresh;
      frag.truth_threshold = o.truth_thresh;
      frag.random = o.random;
      io::write_file_atomic(out / "yolo.cfg", emit_darknet_fragment(frag));
    }
    if (!o.gt.empty()) manifest.inputs.push_back(o.gt);
    if (!o.manifest.empty()) manifest.inputs.push_back(o.manifest);
    if (!o.anchors_file.empty()) manifest.inputs.push_back(o.anchors_file);
    manifest.seeds.push_back({"kmeans", g.seed});
    io::write_file_atomic(out / "run_manifest.txt", manifest.render());

    if (!g.quiet) {
      for (const auto& r : results) {
        out_ << "method " << r.method << '\n';
        out_ << "anchors " << detail::anchor_list(r.anchors) << '\n';
        if (r.diag) {
          out_ << "mean_best_iou " << fmt::fixed(r.diag->mean_best_iou, 4) << '\n';
          out_ << "recall@" << fmt::sig(o.threshold) << ' ' << fmt::fixed(r.diag->recall_at_t, 4) << '\n';
        }
      }
    }
    return 0;
  }

  int cmd_eval(const GlobalOptions& g, const EvalCliOptions& o, RunManifest manifest) {
    if (!(o.iou >= 0.0 && o.iou <= 1.0)) throw UsageError("--iou must be in [0,1]");
    if (!(o.conf >= 0.0 && o.conf <= 1.0)) throw UsageError("--conf must be in [0,1]");
    EvalOptions opt;
    opt.iou_threshold = o.iou;
    opt.confidence_threshold = o.conf;
    if (o.r2 == "correlation") opt.r_squared_mode = RSquaredMode::correlation;
    else if (o.r2 == "identity") opt.r_squared_mode = RSquaredMode::identity;
    else throw UsageError("--r2 must be correlation or identity");
    if (o.interp == "all-point") opt.interpolation = ApInterpolation::all_point;
    else if (o.interp == "11-point") opt.interpolation = ApInterpolation::eleven_point;
    else throw UsageError("--interp must be all-point or 11-point");

    const Dataset gt = load(o.gt, o.manifest);
    const auto preds = load_predictions(o.pred);
    const EvalReport report = evaluate(gt, preds, opt);

    const fs::path out = g.out;
    io::write_file_atomic(out / "eval_report.csv", eval_report_csv(report));
    for (const auto& [cls, curve] : report.curves) {
      const std::string stem = "pr_curve_" + detail::safe_filename(cls);
      io::write_file_atomic(out / (stem + ".csv"), pr_curve_csv(curve));
      svg::Chart c("Precision-recall: " + cls, "recall", "precision");
      svg::Series s{"", "#1f5fbf", {}, 2.0, true};
      for (const auto& p : curve.points) s.points.push_back({p.recall, p.precision});
      c.add_series(std::move(s));
      c.set_x_range({0.0, 1.0});
      c.set_y_range({0.0, 1.05});
      c.add_note("AP " + fmt::fixed(curve.ap, 4));
      io::write_file_atomic(out / (stem + ".svg"), c.render());
    }

    io::write_file_atomic(out / "count_scatter.csv", count_pairs_csv(report.count_pairs));
    {
      svg::Chart c("True vs predicted count", "true count", "predicted count");
      svg::Series s{"images", "#1f5fbf", {}, 3.0, false};
      double hi = 1.0;
      for (const auto& p : report.count_pairs) {
        s.points.push_back({static_cast<double>(p.true_count), static_cast<double>(p.predicted_count)});
        hi = std::max({hi, static_cast<double>(p.true_count), static_cast<double>(p.predicted_count)});
      }
      c.add_series(svg::Series{"", "#8c8c8c", {{0.0, 0.0}, {hi, hi}}, 1.0, true});
      c.add_series(std::move(s));
      c.set_x_range({0.0, hi * 1.05});
      c.set_y_range({0.0, hi * 1.05});
      c.add_note(report.r_squared ? "R2 = " + fmt::fixed(*report.r_squared, 4) : "R2 undefined");
      c.add_note("IoU threshold " + fmt::sig(o.iou) + ", confidence >= " + fmt::sig(o.conf));
      io::write_file_atomic(out / "count_scatter.svg", c.render());
    }

    std::map<std::string_view, const ImageDetections*> by_id;
    for (const auto& p : preds) by_id[p.image_id] = &p;
    for (const auto& m : report.matches) {
      const ImageAnnotations& img = *gt.find(m.image_id);
      const ImageDetections empty{m.image_id, {}};
      auto it = by_id.find(m.image_id);
      const ImageDetections& det = it == by_id.end() ? empty : *it->second;
      io::write_file_atomic(out / "overlays" / (detail::safe_filename(m.image_id) + ".csv"), overlay_csv(img, det, m));
    }

    manifest.inputs = {o.gt, o.pred};
    if (!o.manifest.empty()) manifest.inputs.push_back(o.manifest);
    io::write_file_atomic(out / "run_manifest.txt", manifest.render());

    if (!g.quiet) {
      out_ << "mAP " << fmt::fixed(report.map_score, 4) << '\n';
      for (const auto& [cls, ap] : report.ap_per_class) out_ << "AP " << cls << ' ' << fmt::fixed(ap, 4) << '\n';
      if (report.r_squared) {
        out_ << "R2 " << fmt::fixed(*report.r_squared, 4) << '\n';
      } else {
        out_ << "R2 undefined (" << report.r_squared_note << ")\n";
      }
    }
    return 0;
  }

  int cmd_synth(const GlobalOptions& g, SynthCliOptions o, bool noise_flags_given, RunManifest manifest) {
    if (noise_flags_given && !o.simulate) throw UsageError("detector noise flags require --simulate");
    o.config.seed = g.seed;
    try {
      validate(o.config);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    DetectorNoise noise;
    if (o.simulate) {
      noise.miss_rate = o.miss_rate;
      noise.false_positive_rate = o.fp_rate;
      noise.jitter_sd = o.jitter;
      std::tie(noise.tp_confidence_low, noise.tp_confidence_high) = detail::parse_range(o.tp_conf);
      std::tie(noise.fp_confidence_low, noise.fp_confidence_high) = detail::parse_range(o.fp_conf);
      noise.seed = o.detector_seed.value_or(g.seed + 1);
      for (auto& [k, v] : manifest.parameters) {
        if (k == "detector-seed") v = std::to_string(noise.seed);
      }
      try {
        validate(noise);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
    }

    const Dataset ds = generate_dataset(o.config);
    const fs::path out = g.out;
    std::set<std::string> names;
    for (const auto& [id, img] : ds.images()) {
      names.insert(id + ".txt");
      io::write_file_atomic(out / "gt" / (id + ".txt"), serialize_ground_truth(img));
    }
    detail::remove_stale_txt(out / "gt", names);
    io::write_file_atomic(out / "manifest.csv", serialize_manifest(ds));
    manifest.seeds.push_back({"dataset", o.config.seed});
    if (o.simulate) {
      const auto preds = simulate_detector(ds, noise);
      for (const auto& p : preds) io::write_file_atomic(out / "pred" / (p.image_id + ".txt"), serialize_predictions(p));
      detail::remove_stale_txt(out / "pred", names);
      manifest.seeds.push_back({"detector", noise.seed});
    }
    io::write_file_atomic(out / "run_manifest.txt", manifest.render());
    if (!g.quiet) {
      out_ << "images " << ds.size() << '\n';
      out_ << "boxes " << ds.box_count() << '\n';
      out_ << "wrote " << (out / "gt").string() << '\n';
      if (o.simulate) out_ << "wrote " << (out / "pred").string() << '\n';
    }
    return 0;
  }

 private:
  static Dataset load(const std::string& gt, const std::string& manifest) {
    std::optional<fs::path> m;
    if (!manifest.empty()) m = manifest;
    return load_dataset(gt, m);
  }

  std::ostream& out_;
  std::ostream& err_;
};

/// Parses `args` (without the program name) and runs one subcommand.
/// Returns 0 on success, 1 on data errors, 2 on usage errors.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Anchor-box tuning, dataset statistics and detection evaluation for box-annotated images",
               "headcount"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  GlobalOptions g;
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Seed for every randomized step");
  app.add_flag("--quiet", g.quiet, "Suppress standard output");

  StatsOptions so;
  auto* stats = app.add_subcommand("stats", "Per-image box counts, coverage, histograms and outlier flags");
  stats->add_option("--gt", so.gt, "Ground-truth directory of <image_id>.txt files")->required();
  stats->add_option("--manifest", so.manifest, "CSV image_id,width,height (dimensions are inferred when absent)");
  stats->add_option("--min-count", so.min_count, "Flag images with fewer boxes than this");
  stats->add_option("--min-coverage", so.min_coverage, "Flag images whose coverage fraction is below this")
      ->check(CLI::Range(0.0, 1e9));
  stats->add_option("--bins", so.bins, "Histogram bins")->check(CLI::PositiveNumber);

  AnchorsOptions ao;
  auto* anchors = app.add_subcommand("anchors", "Anchor selection by k-means or line-fit sampling");
  anchors->add_option("--gt", ao.gt, "Ground-truth directory");
  anchors->add_option("--manifest", ao.manifest, "Image dimension manifest");
  anchors->add_option("--method", ao.method, "kmeans or linefit")->check(CLI::IsMember({"kmeans", "linefit"}));
  anchors->add_option("--k", ao.k, "Number of k-means clusters")->check(CLI::PositiveNumber);
  anchors->add_option("--distance", ao.distance, "k-means distance: iou (1 - centered IoU) or euclidean")
      ->check(CLI::IsMember({"iou", "euclidean"}));
  anchors->add_option("--n-line", ao.n_line, "Anchors sampled along the fitted line")->check(CLI::PositiveNumber);
  anchors->add_option("--n-total", ao.n_total, "Total line-fit anchors including floor and variance extras")
      ->check(CLI::PositiveNumber);
  anchors->add_option("--floor", ao.floor, "Floor anchor WxH for the smallest boxes, or 'none'");
  anchors->add_option("--variance-bins", ao.variance_bins, "Equal-count width bins for variance extras")
      ->check(CLI::PositiveNumber);
  anchors->add_option("--threshold", ao.threshold, "Centered-IoU threshold for the recall diagnostic")
      ->check(CLI::Range(0.0, 1.0));
  anchors->add_option("--layers", ao.layers, "Anchors per detection layer, smallest first (default 3,4,6 for 13)")
      ->delimiter(',')
      ->default_str("");
  anchors->add_flag("--compare", ao.compare, "Also run the other method and report both");
  anchors->add_flag("--emit-darknet", ao.emit_darknet, "Write a Darknet [yolo] fragment to yolo.cfg");
  anchors->add_option("--anchors-file", ao.anchors_file, "Use anchors from a width,height CSV instead of computing");
  anchors->add_option("--classes", ao.classes, "Darknet classes")->check(CLI::PositiveNumber);
  anchors->add_option("--jitter", ao.jitter, "Darknet jitter");
  anchors->add_option("--ignore-thresh", ao.ignore_thresh, "Darknet ignore_thresh");
  anchors->add_option("--truth-thresh", ao.truth_thresh, "Darknet truth_thresh");
  anchors->add_option("--random", ao.random, "Darknet random");

  EvalCliOptions eo;
  auto* eval = app.add_subcommand("eval", "IoU matching, precision-recall, AP/mAP and count R2");
  eval->add_option("--gt", eo.gt, "Ground-truth directory")->required();
  eval->add_option("--pred", eo.pred, "Prediction directory of <image_id>.txt files")->required();
  eval->add_option("--manifest", eo.manifest, "Image dimension manifest");
  eval->add_option("--iou", eo.iou, "IoU threshold for a true positive");
  eval->add_option("--conf", eo.conf, "Confidence cutoff for predicted counts");
  eval->add_option("--r2", eo.r2, "correlation (squared Pearson) or identity (about predicted = true)")
      ->check(CLI::IsMember({"correlation", "identity"}));
  eval->add_option("--interp", eo.interp, "AP interpolation: all-point or 11-point")
      ->check(CLI::IsMember({"all-point", "11-point"}));

  SynthCliOptions yo;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus and optionally simulated detections");
  synth->add_option("--images", yo.config.n_images, "Number of images")->check(CLI::PositiveNumber);
  synth->add_option("--width", yo.config.image_width, "Image width")->check(CLI::PositiveNumber);
  synth->add_option("--height", yo.config.image_height, "Image height")->check(CLI::PositiveNumber);
  synth->add_option("--count-mean", yo.config.count_mean, "Mean boxes per image")->check(CLI::PositiveNumber);
  synth->add_option("--count-sd", yo.config.count_sd, "Standard deviation of boxes per image")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--min-width", yo.config.min_width, "Smallest box width")->check(CLI::PositiveNumber);
  synth->add_option("--max-width", yo.config.max_width, "Largest box width")->check(CLI::PositiveNumber);
  synth->add_option("--slope", yo.config.line_slope, "Height-on-width slope");
  synth->add_option("--intercept", yo.config.line_intercept, "Height-on-width intercept");
  synth->add_option("--residual-sd", yo.config.residual_sd, "Height noise around the line")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--class", yo.config.class_name, "Class label written to every box");
  synth->add_flag("--simulate", yo.simulate, "Also write simulated detector output to pred/");
  auto* o_miss = synth->add_option("--miss-rate", yo.miss_rate, "Probability a box is missed")
                     ->check(CLI::Range(0.0, 1.0));
  auto* o_fp = synth->add_option("--fp-rate", yo.fp_rate, "Expected spurious boxes per image")
                   ->check(CLI::NonNegativeNumber);
  auto* o_jit = synth->add_option("--jitter", yo.jitter, "Per-edge jitter standard deviation (pixels)")
                    ->check(CLI::NonNegativeNumber);
  auto* o_tpc = synth->add_option("--tp-conf", yo.tp_conf, "Confidence range LOW,HIGH for kept boxes");
  auto* o_fpc = synth->add_option("--fp-conf", yo.fp_conf, "Confidence range LOW,HIGH for spurious boxes");
  auto* o_dseed = synth->add_option("--detector-seed", yo.detector_seed, "Detector seed (default: seed + 1)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    app.exit(e, out, err);
    return 2;
  }

  Runner runner(out, err);
  try {
    const CLI::App* sub = app.get_subcommands().front();
    RunManifest manifest;
    manifest.command = sub->get_name();
    manifest.parameters = detail::resolved_parameters(app, *sub);
    manifest.timestamp = detail::utc_now();
    if (sub == stats) return runner.cmd_stats(g, so, std::move(manifest));
    if (sub == anchors) return runner.cmd_anchors(g, ao, std::move(manifest));
    if (sub == eval) return runner.cmd_eval(g, eo, std::move(manifest));
    const bool noise_flags = o_miss->count() + o_fp->count() + o_jit->count() + o_tpc->count() + o_fpc->count() +
                                 o_dseed->count() > 0;
    return runner.cmd_synth(g, yo, noise_flags, std::move(manifest));
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace headcount::cli
