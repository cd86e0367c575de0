#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "evdet/frame_synthesis.hpp"
#include "evdet/geometry.hpp"

namespace evdet {

/// Burns a 1-pixel outline of `box` into `frame`. The outline runs along the
/// outermost pixel rows/columns the box touches; parts outside the frame are
/// clipped. Returns the number of pixels written.
inline std::size_t draw_box_outline(GrayFrame& frame, const BoundingBox& box, std::uint8_t value = 255) {
  const auto left = static_cast<std::int64_t>(std::floor(box.x0));
  const auto top = static_cast<std::int64_t>(std::floor(box.y0));
  const auto right = static_cast<std::int64_t>(std::ceil(box.x1)) - 1;
  const auto bottom = static_cast<std::int64_t>(std::ceil(box.y1)) - 1;
  const std::int64_t w = frame.width, h = frame.height;
  std::size_t written = 0;
  auto put = [&](std::int64_t x, std::int64_t y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    frame.at(std::size_t(x), std::size_t(y)) = value;
    ++written;
  };
  for (std::int64_t x = std::max<std::int64_t>(left, 0); x <= std::min(right, w - 1); ++x) {
    put(x, top);
    if (bottom != top) put(x, bottom);
  }
  for (std::int64_t y = std::max<std::int64_t>(top + 1, 0); y <= std::min(bottom - 1, h - 1); ++y) {
    put(left, y);
    if (right != left) put(right, y);
  }
  return written;
}

/// Draws every box whose confidence reaches `display_threshold`.
inline GrayFrame render_overlay(GrayFrame frame, const std::vector<BoundingBox>& boxes,
                                double display_threshold = 0.5, std::uint8_t value = 255) {
  for (const auto& b : boxes)
    if (b.confidence >= display_threshold) draw_box_outline(frame, b, value);
  return frame;
}

}  // namespace evdet
