#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "headcount/core.hpp"
#include "headcount/geometry.hpp"
#include "headcount/io.hpp"

namespace headcount {

struct GroundTruthBox {
  std::string class_name;
  BoundingBox box;

  bool operator==(const GroundTruthBox&) const = default;
};

/// One row of a prediction file.
struct Detection {
  std::string class_name;
  double confidence = 0.0;
  BoundingBox box;

  bool operator==(const Detection&) const = default;
};

/// Ground truth for one image. Dimensions come from the manifest, or are
/// inferred from the box extents (dims_inferred set), or are absent.
struct ImageAnnotations {
  std::string image_id;
  std::optional<double> width;
  std::optional<double> height;
  bool dims_inferred = false;
  std::vector<GroundTruthBox> boxes;

  bool operator==(const ImageAnnotations&) const = default;
};

struct ImageDetections {
  std::string image_id;
  std::vector<Detection> detections;

  bool operator==(const ImageDetections&) const = default;
};

/// Ground-truth corpus keyed by image id. Iteration is in id order, so
/// everything computed from a Dataset is independent of how it was filled.
class Dataset {
 public:
  using Map = std::map<std::string, ImageAnnotations, std::less<>>;

  /// Adds an image; rejects duplicate ids and boxes outside known dimensions.
  void add(ImageAnnotations image) {
    if (image.image_id.empty()) throw Error("image id must be non-empty");
    if (images_.contains(image.image_id)) throw Error("duplicate image id '" + image.image_id + "'");
    check_bounds(image);
    std::string id = image.image_id;
    images_.emplace(std::move(id), std::move(image));
  }

  const ImageAnnotations* find(std::string_view image_id) const {
    auto it = images_.find(image_id);
    return it == images_.end() ? nullptr : &it->second;
  }

  const Map& images() const noexcept { return images_; }
  std::size_t size() const noexcept { return images_.size(); }
  bool empty() const noexcept { return images_.empty(); }

  std::size_t box_count() const {
    std::size_t n = 0;
    for (const auto& [id, img] : images_) n += img.boxes.size();
    return n;
  }

  bool operator==(const Dataset&) const = default;

  static void check_bounds(const ImageAnnotations& image) {
    for (std::size_t i = 0; i < image.boxes.size(); ++i) {
      const BoundingBox& b = image.boxes[i].box;
      if (image.width && b.right > *image.width) {
        throw Error("image '" + image.image_id + "': box " + std::to_string(i + 1) +
                    " exceeds image bounds (right " + fmt::shortest(b.right) + " > width " +
                    fmt::shortest(*image.width) + ")");
      }
      if (image.height && b.bottom > *image.height) {
        throw Error("image '" + image.image_id + "': box " + std::to_string(i + 1) +
                    " exceeds image bounds (bottom " + fmt::shortest(b.bottom) + " > height " +
                    fmt::shortest(*image.height) + ")");
      }
    }
  }

 private:
  Map images_;
};

namespace detail {

inline BoundingBox parse_box(const std::vector<std::string_view>& f, std::size_t first,
                             const std::string& source, std::size_t line) {
  static constexpr const char* names[] = {"left", "top", "right", "bottom"};
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    auto parsed = text::parse_real(f[first + i]);
    if (!parsed) {
      throw ParseError(source, line,
                       std::string("non-numeric ") + names[i] + " coordinate '" + std::string(f[first + i]) + "'");
    }
    v[i] = *parsed;
  }
  BoundingBox box{v[0], v[1], v[2], v[3]};
  if (auto why = box_violation(box)) throw ParseError(source, line, *why);
  return box;
}

}  // namespace detail

/// Parses `<class> <left> <top> <right> <bottom>` lines. Blank lines are
/// skipped; reported line numbers are physical lines starting at 1.
inline ImageAnnotations parse_ground_truth(std::string_view content, const std::string& image_id) {
  ImageAnnotations out;
  out.image_id = image_id;
  auto all = text::lines(content);
  for (std::size_t n = 0; n < all.size(); ++n) {
    auto f = text::fields(all[n]);
    if (f.empty()) continue;
    if (f.size() != 5) {
      throw ParseError(image_id, n + 1, "expected 5 fields, found " + std::to_string(f.size()));
    }
    out.boxes.push_back({std::string(f[0]), detail::parse_box(f, 1, image_id, n + 1)});
  }
  return out;
}

/// Parses `<class> <confidence> <left> <top> <right> <bottom>` lines.
inline ImageDetections parse_predictions(std::string_view content, const std::string& image_id) {
  ImageDetections out;
  out.image_id = image_id;
  auto all = text::lines(content);
  for (std::size_t n = 0; n < all.size(); ++n) {
    auto f = text::fields(all[n]);
    if (f.empty()) continue;
    if (f.size() != 6) {
      throw ParseError(image_id, n + 1, "expected 6 fields, found " + std::to_string(f.size()));
    }
    auto conf = text::parse_real(f[1]);
    if (!conf) throw ParseError(image_id, n + 1, "non-numeric confidence '" + std::string(f[1]) + "'");
    if (*conf < 0.0 || *conf > 1.0) {
      throw ParseError(image_id, n + 1, "confidence " + std::string(f[1]) + " out of range [0,1]");
    }
    out.detections.push_back({std::string(f[0]), *conf, detail::parse_box(f, 2, image_id, n + 1)});
  }
  return out;
}

inline std::string serialize_ground_truth(const ImageAnnotations& image) {
  std::string s;
  for (const auto& g : image.boxes) {
    s += g.class_name;
    for (double v : {g.box.left, g.box.top, g.box.right, g.box.bottom}) s += ' ' + fmt::shortest(v);
    s += '\n';
  }
  return s;
}

inline std::string serialize_predictions(const ImageDetections& image) {
  std::string s;
  for (const auto& d : image.detections) {
    s += d.class_name + ' ' + fmt::shortest(d.confidence);
    for (double v : {d.box.left, d.box.top, d.box.right, d.box.bottom}) s += ' ' + fmt::shortest(v);
    s += '\n';
  }
  return s;
}

struct ManifestRow {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;

  bool operator==(const ManifestRow&) const = default;
};

/// CSV with header `image_id,width,height`.
inline std::vector<ManifestRow> parse_manifest(std::string_view content, const std::string& source = "manifest") {
  std::vector<ManifestRow> rows;
  auto all = text::lines(content);
  bool header_seen = false;
  for (std::size_t n = 0; n < all.size(); ++n) {
    std::string_view line = text::trim(all[n]);
    if (line.empty()) continue;
    auto cols = text::split(line, ',');
    for (auto& c : cols) c = text::trim(c);
    if (!header_seen) {
      if (cols.size() != 3 || cols[0] != "image_id" || cols[1] != "width" || cols[2] != "height") {
        throw ParseError(source, n + 1, "expected header 'image_id,width,height'");
      }
      header_seen = true;
      continue;
    }
    if (cols.size() != 3) throw ParseError(source, n + 1, "expected 3 columns, found " + std::to_string(cols.size()));
    if (cols[0].empty()) throw ParseError(source, n + 1, "empty image_id");
    auto w = text::parse_real(cols[1]);
    auto h = text::parse_real(cols[2]);
    if (!w || !h || *w <= 0 || *h <= 0) throw ParseError(source, n + 1, "width and height must be positive numbers");
    for (const auto& r : rows) {
      if (r.image_id == cols[0]) throw ParseError(source, n + 1, "duplicate image_id '" + r.image_id + "'");
    }
    rows.push_back({std::string(cols[0]), *w, *h});
  }
  if (!header_seen) throw ParseError(source, 1, "expected header 'image_id,width,height'");
  return rows;
}

inline std::string serialize_manifest(const Dataset& dataset) {
  std::string s = "image_id,width,height\n";
  for (const auto& [id, img] : dataset.images()) {
    if (!img.width || !img.height || img.dims_inferred) continue;
    s += id + ',' + fmt::shortest(*img.width) + ',' + fmt::shortest(*img.height) + '\n';
  }
  return s;
}

/// Width and height as the ceiling of the furthest right/bottom edge.
inline void infer_dimensions(ImageAnnotations& image) {
  double w = 0.0, h = 0.0;
  for (const auto& g : image.boxes) {
    w = std::max(w, g.box.right);
    h = std::max(h, g.box.bottom);
  }
  image.width = std::ceil(w);
  image.height = std::ceil(h);
  image.dims_inferred = true;
}

namespace detail {

inline std::vector<std::filesystem::path> txt_files(const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(directory)) throw Error("not a directory: " + directory.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace detail

/// Applies manifest dimensions; images without a manifest row get inferred
/// dimensions.
inline void attach_dimensions(Dataset& dataset, const std::vector<ManifestRow>& rows) {
  Dataset out;
  std::map<std::string, const ManifestRow*, std::less<>> by_id;
  for (const auto& r : rows) {
    if (!dataset.find(r.image_id)) throw Error("manifest row references missing image '" + r.image_id + "'");
    by_id[r.image_id] = &r;
  }
  for (const auto& [id, img] : dataset.images()) {
    ImageAnnotations copy = img;
    if (auto it = by_id.find(id); it != by_id.end()) {
      copy.width = it->second->width;
      copy.height = it->second->height;
      copy.dims_inferred = false;
    } else if (!copy.width || !copy.height) {
      infer_dimensions(copy);
    }
    out.add(std::move(copy));
  }
  dataset = std::move(out);
}

/// Loads `<image_id>.txt` ground-truth files from a directory.
inline Dataset load_dataset(const std::filesystem::path& directory,
                            const std::optional<std::filesystem::path>& manifest = std::nullopt) {
  auto files = detail::txt_files(directory);
  if (files.empty()) throw Error("no annotation files found in " + directory.string());
  Dataset ds;
  for (const auto& path : files) {
    const std::string id = path.stem().string();
    ImageAnnotations img;
    try {
      img = parse_ground_truth(io::read_file(path), id);
    } catch (const ParseError& e) {
      throw ParseError(path.string(), e.line(), e.reason());
    }
    ds.add(std::move(img));
  }
  std::vector<ManifestRow> rows;
  if (manifest) rows = parse_manifest(io::read_file(*manifest), manifest->string());
  attach_dimensions(ds, rows);
  return ds;
}

/// Loads `<image_id>.txt` prediction files. An empty directory is valid.
inline std::vector<ImageDetections> load_predictions(const std::filesystem::path& directory) {
  std::vector<ImageDetections> out;
  for (const auto& path : detail::txt_files(directory)) {
    try {
      out.push_back(parse_predictions(io::read_file(path), path.stem().string()));
    } catch (const ParseError& e) {
      throw ParseError(path.string(), e.line(), e.reason());
    }
  }
  return out;
}

}  // namespace headcount
