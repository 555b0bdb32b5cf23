#pragma once

#include <concepts>
#include <optional>
#include <string>

namespace headcount {

/// Axis-aligned rectangle in pixel coordinates.
///
/// Coordinates are continuous edges: a box from left=0 to right=10 is ten
/// pixels wide and area is (right - left) * (bottom - top).
struct BoundingBox {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double width() const noexcept { return right - left; }
  double height() const noexcept { return bottom - top; }
  double area() const noexcept { return width() * height(); }

  bool operator==(const BoundingBox&) const = default;
};

/// Reason a box violates its invariants, or nullopt when it is valid.
inline std::optional<std::string> box_violation(const BoundingBox& b) {
  if (b.left < 0 || b.top < 0 || b.right < 0 || b.bottom < 0) return "negative coordinate";
  if (!(b.right > b.left)) return b.right == b.left ? "zero-width box" : "right edge left of left edge";
  if (!(b.bottom > b.top)) return b.bottom == b.top ? "zero-height box" : "bottom edge above top edge";
  return std::nullopt;
}

/// Width and height of a ground-truth box.
struct BoxDims {
  double width = 0.0;
  double height = 0.0;

  double area() const noexcept { return width * height; }
  bool operator==(const BoxDims&) const = default;
};

inline BoxDims dims_of(const BoundingBox& b) noexcept { return {b.width(), b.height()}; }

/// Anything with a width and a height: BoxDims, Anchor.
template <typename T>
concept Extent = requires(const T& t) {
  { t.width } -> std::convertible_to<double>;
  { t.height } -> std::convertible_to<double>;
};

}  // namespace headcount
