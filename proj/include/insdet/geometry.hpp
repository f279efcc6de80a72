#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "insdet/error.hpp"

namespace insdet {

// Axis-aligned box in pixel space. Intervals are half-open, [min, max), with
// the origin at the top-left corner of the image.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  bool valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) &&
           std::isfinite(x_max) && std::isfinite(y_max) && x_min >= 0.0 &&
           y_min >= 0.0 && x_min < x_max && y_min < y_max;
  }

  bool contains(const BoundingBox& other) const {
    return x_min <= other.x_min && y_min <= other.y_min &&
           x_max >= other.x_max && y_max >= other.y_max;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline BoundingBox make_box(double x_min, double y_min, double x_max,
                            double y_max) {
  BoundingBox box{x_min, y_min, x_max, y_max};
  if (!box.valid()) {
    fail(ErrorCode::kMalformedBbox, "invalid box: coordinates must be finite, "
                                    "non-negative, with min < max");
  }
  return box;
}

// Converts the [x, y, width, height] carrier form into corners.
inline BoundingBox box_from_xywh(double x, double y, double w, double h) {
  if (!(w > 0.0) || !(h > 0.0)) {
    fail(ErrorCode::kMalformedBbox, "bbox width and height must be > 0");
  }
  return make_box(x, y, x + w, y + h);
}

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

enum class SizeTag { kSmall, kMedium, kLarge };

inline constexpr double kSmallAreaLimit = 200.0 * 200.0;
inline constexpr double kLargeAreaLimit = 400.0 * 400.0;

// Medium is closed on both ends: 200^2 and 400^2 are both medium.
inline SizeTag size_tag_for_area(double area) {
  if (area < kSmallAreaLimit) return SizeTag::kSmall;
  if (area <= kLargeAreaLimit) return SizeTag::kMedium;
  return SizeTag::kLarge;
}

inline SizeTag size_tag(const BoundingBox& box) {
  return size_tag_for_area(box.area());
}

inline std::string_view to_string(SizeTag tag) {
  switch (tag) {
    case SizeTag::kSmall: return "small";
    case SizeTag::kMedium: return "medium";
    case SizeTag::kLarge: return "large";
  }
  return "small";
}

// Binary mask, one entry per pixel, row-major. Nonzero means foreground.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(checked_area(width, height)), 0) {}
  Mask(int width, int height, std::vector<std::uint8_t> bits)
      : width_(width), height_(height), bits_(std::move(bits)) {
    if (bits_.size() != static_cast<std::size_t>(checked_area(width, height))) {
      fail(ErrorCode::kInvalidArgument, "mask bitmap length != width * height");
    }
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool on = true) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0;
  }

  std::size_t count() const {
    return static_cast<std::size_t>(
        std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  const std::vector<std::uint8_t>& bits() const { return bits_; }

 private:
  static long long checked_area(int width, int height) {
    if (width < 0 || height < 0) {
      fail(ErrorCode::kInvalidArgument, "mask dimensions must be >= 0");
    }
    return static_cast<long long>(width) * height;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Tight pixel box around the foreground, or nullopt for an empty mask.
inline std::optional<BoundingBox> tight_box(const Mask& mask) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  return BoundingBox{double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
}

namespace detail {

// Places [lo, lo + side) around the interval [lo_in, hi_in) and slides it
// into [0, limit). Assumes side <= limit.
inline long long place_span(long long lo_in, long long hi_in, long long side,
                            long long limit) {
  long long lo = lo_in - (side - (hi_in - lo_in)) / 2;
  if (lo < 0) lo = 0;
  if (lo + side > limit) lo = limit - side;
  return lo;
}

}  // namespace detail

// Smallest square containing the tight box of `box`, centered on it (extra
// odd pixel goes to the far side), translated into the image, and shrunk to
// the image's short side only when the tight box cannot fit in any square.
inline BoundingBox min_bounding_square(const BoundingBox& tight, int image_w,
                                       int image_h) {
  if (image_w <= 0 || image_h <= 0) {
    fail(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  }
  const auto x0 = static_cast<long long>(std::floor(tight.x_min));
  const auto y0 = static_cast<long long>(std::floor(tight.y_min));
  const auto x1 = static_cast<long long>(std::ceil(tight.x_max));
  const auto y1 = static_cast<long long>(std::ceil(tight.y_max));
  const long long side = std::min<long long>(std::max(x1 - x0, y1 - y0),
                                             std::min(image_w, image_h));
  const long long sx = detail::place_span(x0, x1, side, image_w);
  const long long sy = detail::place_span(y0, y1, side, image_h);
  return BoundingBox{double(sx), double(sy), double(sx + side),
                     double(sy + side)};
}

inline BoundingBox min_bounding_square(const Mask& mask, int image_w,
                                       int image_h) {
  const auto tight = tight_box(mask);
  if (!tight) fail(ErrorCode::kEmptyProposal, "empty proposal");
  return min_bounding_square(*tight, image_w, image_h);
}

}  // namespace insdet
