#pragma once

#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <string>
#include <vector>

#include "evdet/detections.hpp"
#include "evdet/errors.hpp"
#include "evdet/frame_synthesis.hpp"

namespace evdet {

// Connected-component blob proposals on a binned event window. A stand-in
// detector for exercising the detect -> evaluate path without a network.

struct BlobParams {
  std::size_t min_area = 20;
  int connectivity = 4;  ///< 4 or 8
  Representation representation = Representation::Sigmoid;
  std::int32_t activity_threshold = 1;  ///< active iff |x| >= this
  std::string class_label = "object";
};

namespace detail {

inline void check_blob_params(const BlobParams& p) {
  if (p.min_area < 1) throw InputError("min_area must be >= 1");
  if (p.connectivity != 4 && p.connectivity != 8) throw InputError("connectivity must be 4 or 8");
  if (p.activity_threshold < 1) throw InputError("activity_threshold must be >= 1");
}

struct UnionFind {
  std::vector<std::uint32_t> parent;
  std::uint32_t make() {
    parent.push_back(std::uint32_t(parent.size()));
    return parent.back();
  }
  std::uint32_t find(std::uint32_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a < b) parent[b] = a;
    else if (b < a) parent[a] = b;
  }
};

}  // namespace detail

/// Component id per pixel (-1 for inactive), numbered by first pixel in raster
/// order. Two-pass union-find labeling.
inline std::vector<std::int32_t> label_components(const std::vector<bool>& active, std::size_t width,
                                                  std::size_t height, int connectivity,
                                                  std::size_t* count = nullptr) {
  std::vector<std::int32_t> labels(width * height, -1);
  detail::UnionFind uf;
  std::vector<std::uint32_t> provisional(width * height, 0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t i = y * width + x;
      if (!active[i]) continue;
      std::int64_t label = -1;
      auto join = [&](std::size_t j) {
        if (!active[j]) return;
        if (label < 0) label = provisional[j];
        else uf.unite(std::uint32_t(label), provisional[j]);
      };
      if (x > 0) join(i - 1);
      if (y > 0) {
        join(i - width);
        if (connectivity == 8) {
          if (x > 0) join(i - width - 1);
          if (x + 1 < width) join(i - width + 1);
        }
      }
      provisional[i] = label < 0 ? uf.make() : std::uint32_t(label);
    }
  }

  std::vector<std::int32_t> compact(uf.parent.size(), -1);
  std::int32_t next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!active[i]) continue;
    const std::uint32_t root = uf.find(provisional[i]);
    if (compact[root] < 0) compact[root] = next++;
    labels[i] = compact[root];
  }
  if (count) *count = std::size_t(next);
  return labels;
}

namespace detail {

inline DetectionSet boxes_from_mask(const std::vector<bool>& active, std::size_t width,
                                    std::size_t height, const BlobParams& params) {
  std::size_t n = 0;
  const auto labels = label_components(active, width, height, params.connectivity, &n);
  struct Extent {
    std::size_t x0, y0, x1, y1, pixels = 0;
  };
  std::vector<Extent> ext(n, Extent{width, height, 0, 0, 0});
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const auto l = labels[y * width + x];
      if (l < 0) continue;
      Extent& e = ext[std::size_t(l)];
      e.x0 = std::min(e.x0, x);
      e.y0 = std::min(e.y0, y);
      e.x1 = std::max(e.x1, x + 1);
      e.y1 = std::max(e.y1, y + 1);
      ++e.pixels;
    }

  DetectionSet out;
  out.source = "blob";
  for (const Extent& e : ext) {
    if (e.pixels < params.min_area) continue;
    BoundingBox b;
    b.x0 = double(e.x0);
    b.y0 = double(e.y0);
    b.x1 = double(e.x1);
    b.y1 = double(e.y1);
    b.confidence = double(e.pixels) / b.area();
    b.class_label = params.class_label;
    b.source = out.source;
    out.boxes.push_back(std::move(b));
  }
  return out;
}

}  // namespace detail

/// One box per connected group of active pixels (|x| >= activity_threshold)
/// with at least min_area pixels. Confidence is the component's fill density
/// within its bounding rectangle.
inline DetectionSet detect_blobs(const PolarityGrid& grid, const BlobParams& params = {}) {
  detail::check_blob_params(params);
  std::vector<bool> active(grid.sums.size());
  for (std::size_t i = 0; i < active.size(); ++i)
    active[i] = std::abs(std::int64_t(grid.sums[i])) >= params.activity_threshold;
  DetectionSet out = detail::boxes_from_mask(active, grid.width, grid.height, params);
  out.t = grid.t0;
  return out;
}

/// Same proposals from an already-rendered frame. A sigmoid frame marks
/// activity as a departure from the empty-window value 128 at least as large
/// as sigmoid_value(activity_threshold); a binary frame as nonzero pixels.
inline DetectionSet detect_blobs(const GrayFrame& frame, const BlobParams& params = {}) {
  detail::check_blob_params(params);
  std::vector<bool> active(frame.values.size());
  const int rest = sigmoid_value(0);
  const int lo = sigmoid_value(-params.activity_threshold);
  const int hi = sigmoid_value(params.activity_threshold);
  for (std::size_t i = 0; i < active.size(); ++i) {
    const int v = frame.values[i];
    active[i] = params.representation == Representation::Binary ? v != 0
                                                                 : (v != rest && (v <= lo || v >= hi));
  }
  return detail::boxes_from_mask(active, frame.width, frame.height, params);
}

}  // namespace evdet
