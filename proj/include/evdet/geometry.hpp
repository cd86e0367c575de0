#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "evdet/errors.hpp"

namespace evdet {

/// Axis-aligned, real-valued box in pixel coordinates: [x0, x1) x [y0, y1).
struct BoundingBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double confidence = 1.0;
  std::string class_label = "car";
  std::string source;  ///< detector tag, empty when unknown

  double width() const noexcept { return x1 - x0; }
  double height() const noexcept { return y1 - y0; }
  double area() const noexcept { return width() * height(); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline bool is_valid(const BoundingBox& b) {
  return std::isfinite(b.x0) && std::isfinite(b.y0) && std::isfinite(b.x1) &&
         std::isfinite(b.y1) && b.x0 < b.x1 && b.y0 < b.y1 && b.confidence >= 0.0 &&
         b.confidence <= 1.0;
}

inline void require_valid(const BoundingBox& b, std::size_t index = ValidationError::npos) {
  if (!(std::isfinite(b.x0) && std::isfinite(b.y0) && std::isfinite(b.x1) && std::isfinite(b.y1)))
    throw ValidationError("box has non-finite coordinates", index);
  if (!(b.x0 < b.x1 && b.y0 < b.y1))
    throw ValidationError("box needs x0 < x1 and y0 < y1", index);
  if (!(b.confidence >= 0.0 && b.confidence <= 1.0))
    throw ValidationError("box confidence outside [0,1]", index);
}

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return (w > 0 && h > 0) ? w * h : 0.0;
}

/// Intersection over union; 0 for disjoint boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Box indices ordered by confidence descending, ties by index.
inline std::vector<std::size_t> confidence_order(const std::vector<BoundingBox>& boxes) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].confidence > boxes[b].confidence;
  });
  return order;
}

/// Greedy non-maximum suppression. A box is kept iff its IoU with every
/// previously kept box is <= iou_threshold (pairs exactly at the threshold
/// both survive). Output is in confidence order.
inline std::vector<BoundingBox> nms(const std::vector<BoundingBox>& boxes, double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0))
    throw InputError("NMS IoU threshold must be in [0,1]");
  std::vector<BoundingBox> kept;
  for (std::size_t i : confidence_order(boxes)) {
    const BoundingBox& candidate = boxes[i];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const BoundingBox& k) {
      return iou(k, candidate) > iou_threshold;
    });
    if (!suppressed) kept.push_back(candidate);
  }
  return kept;
}

/// Keeps boxes with height >= min_height.
inline std::vector<BoundingBox> filter_min_height(const std::vector<BoundingBox>& boxes,
                                                  double min_height) {
  if (!(min_height >= 0.0)) throw InputError("min height must be >= 0");
  std::vector<BoundingBox> out;
  std::copy_if(boxes.begin(), boxes.end(), std::back_inserter(out),
               [&](const BoundingBox& b) { return b.height() >= min_height; });
  return out;
}

// ---------------------------------------------------------------------------
// Letterbox: aspect-preserving scale of a source image into a destination
// canvas, remainder zero-padded.

struct ImageSize {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

enum class PadPlacement {
  Trailing,  ///< all padding right and bottom; image at the origin
  Centered,  ///< padding split evenly on both sides
};

struct LetterboxTransform {
  double scale = 1.0;
  double pad_x = 0.0;     ///< total horizontal padding
  double pad_y = 0.0;     ///< total vertical padding
  double offset_x = 0.0;  ///< left padding
  double offset_y = 0.0;  ///< top padding
  ImageSize src;
  ImageSize dst;
};

inline LetterboxTransform letterbox(ImageSize src, ImageSize dst,
                                    PadPlacement placement = PadPlacement::Trailing) {
  if (src.width == 0 || src.height == 0 || dst.width == 0 || dst.height == 0)
    throw InputError("letterbox sizes must be positive");
  LetterboxTransform t;
  t.src = src;
  t.dst = dst;
  t.scale = std::min(double(dst.width) / src.width, double(dst.height) / src.height);
  t.pad_x = std::max(0.0, dst.width - src.width * t.scale);
  t.pad_y = std::max(0.0, dst.height - src.height * t.scale);
  if (placement == PadPlacement::Centered) {
    t.offset_x = t.pad_x / 2;
    t.offset_y = t.pad_y / 2;
  }
  return t;
}

/// Source (sensor) coordinates to destination (detector) coordinates.
inline BoundingBox apply(const LetterboxTransform& t, BoundingBox b) {
  b.x0 = b.x0 * t.scale + t.offset_x;
  b.x1 = b.x1 * t.scale + t.offset_x;
  b.y0 = b.y0 * t.scale + t.offset_y;
  b.y1 = b.y1 * t.scale + t.offset_y;
  return b;
}

/// Destination coordinates back to the source, clamped to the source extent.
/// Returns nullopt when clamping leaves no area (the box is dropped).
inline std::optional<BoundingBox> invert(const LetterboxTransform& t, BoundingBox b) {
  const double w = t.src.width, h = t.src.height;
  b.x0 = std::clamp((b.x0 - t.offset_x) / t.scale, 0.0, w);
  b.x1 = std::clamp((b.x1 - t.offset_x) / t.scale, 0.0, w);
  b.y0 = std::clamp((b.y0 - t.offset_y) / t.scale, 0.0, h);
  b.y1 = std::clamp((b.y1 - t.offset_y) / t.scale, 0.0, h);
  if (!(b.x0 < b.x1 && b.y0 < b.y1)) return std::nullopt;
  return b;
}

/// Clamps a box to [0,w] x [0,h]; nullopt when nothing remains.
inline std::optional<BoundingBox> clip_to(BoundingBox b, ImageSize size) {
  b.x0 = std::clamp(b.x0, 0.0, double(size.width));
  b.x1 = std::clamp(b.x1, 0.0, double(size.width));
  b.y0 = std::clamp(b.y0, 0.0, double(size.height));
  b.y1 = std::clamp(b.y1, 0.0, double(size.height));
  if (!(b.x0 < b.x1 && b.y0 < b.y1)) return std::nullopt;
  return b;
}

}  // namespace evdet
