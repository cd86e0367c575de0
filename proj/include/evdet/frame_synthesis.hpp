#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "evdet/errors.hpp"
#include "evdet/event_model.hpp"

namespace evdet {

/// 10 ms windows, i.e. 100 frames per second.
inline constexpr std::uint64_t kDefaultWindowUs = 10'000;

/// Per-pixel sum of event polarities over the half-open window
/// [t0, t0 + duration). Row-major, `sums[y * width + x]`.
struct PolarityGrid {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint64_t t0 = 0;
  std::uint64_t duration = kDefaultWindowUs;
  std::vector<std::int32_t> sums;

  PolarityGrid() = default;
  PolarityGrid(std::uint16_t w, std::uint16_t h, std::uint64_t start, std::uint64_t dur)
      : width(w), height(h), t0(start), duration(dur), sums(std::size_t(w) * h, 0) {}

  std::int32_t& at(std::size_t x, std::size_t y) { return sums[y * width + x]; }
  std::int32_t at(std::size_t x, std::size_t y) const { return sums[y * width + x]; }

  friend bool operator==(const PolarityGrid&, const PolarityGrid&) = default;
};

/// 8-bit single-channel image, row-major.
struct GrayFrame {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<std::uint8_t> values;

  GrayFrame() = default;
  GrayFrame(std::uint16_t w, std::uint16_t h, std::uint8_t fill = 0)
      : width(w), height(h), values(std::size_t(w) * h, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y) { return values[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return values[y * width + x]; }

  friend bool operator==(const GrayFrame&, const GrayFrame&) = default;
};

enum class Representation { Sigmoid, Binary };

namespace detail {

inline std::uint64_t window_end(std::uint64_t t0, std::uint64_t duration) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  return duration > max - t0 ? max : t0 + duration;
}

inline void require_duration(std::uint64_t duration) {
  if (duration == 0) throw InputError("window duration must be > 0");
}

}  // namespace detail

/// Sums polarities of events with t0 <= t < t0 + duration. Relies on the
/// stream's sorted timestamps to touch only the events inside the window.
inline PolarityGrid accumulate_window(const EventStream& stream, std::uint64_t t0,
                                      std::uint64_t duration) {
  detail::require_duration(duration);
  PolarityGrid grid(stream.width, stream.height, t0, duration);
  const std::uint64_t t1 = detail::window_end(t0, duration);
  const auto by_time = [](const Event& e, std::uint64_t t) { return e.t < t; };
  auto it = std::lower_bound(stream.events.begin(), stream.events.end(), t0, by_time);
  std::int32_t* sums = grid.sums.data();
  const std::size_t w = stream.width;
  for (; it != stream.events.end() && it->t < t1; ++it) sums[it->y * w + it->x] += it->polarity;
  return grid;
}

/// Consecutive windows [anchor + i*duration, anchor + (i+1)*duration) for
/// i in [0, count), built in a single pass over the stream.
inline std::vector<PolarityGrid> window_sequence(const EventStream& stream, std::uint64_t anchor,
                                                 std::uint64_t duration, std::size_t count) {
  detail::require_duration(duration);
  std::vector<PolarityGrid> grids;
  grids.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    grids.emplace_back(stream.width, stream.height, anchor + i * duration, duration);
  if (count == 0) return grids;

  const auto by_time = [](const Event& e, std::uint64_t t) { return e.t < t; };
  auto it = std::lower_bound(stream.events.begin(), stream.events.end(), anchor, by_time);
  const std::size_t w = stream.width;
  std::size_t window = 0;
  std::uint64_t window_stop = detail::window_end(anchor, duration);
  std::int32_t* sums = grids[0].sums.data();
  for (; it != stream.events.end(); ++it) {
    while (it->t >= window_stop) {
      if (++window == count) return grids;
      window_stop = detail::window_end(window_stop, duration);
      sums = grids[window].sums.data();
    }
    sums[it->y * w + it->x] += it->polarity;
  }
  return grids;
}

/// Number of windows needed to cover every event at or after `anchor`.
inline std::size_t windows_covering(const EventStream& stream, std::uint64_t anchor,
                                    std::uint64_t duration) {
  detail::require_duration(duration);
  if (stream.events.empty() || stream.events.back().t < anchor) return 0;
  return static_cast<std::size_t>((stream.events.back().t - anchor) / duration + 1);
}

// ---------------------------------------------------------------------------
// Rendering

/// 255 / (1 + exp(-x/2)), rounded half away from zero. Saturates to 0/255 for
/// |x| >= 13.
inline std::uint8_t sigmoid_value(std::int32_t x) {
  static const auto table = [] {
    std::array<std::uint8_t, 129> t{};
    for (int i = -64; i <= 64; ++i) {
      const double v = 255.0 / (1.0 + std::exp(-double(i) / 2.0));
      t[std::size_t(i + 64)] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
    }
    return t;
  }();
  return table[std::size_t(std::clamp(x, -64, 64) + 64)];
}

inline GrayFrame sigmoid_render(const PolarityGrid& grid) {
  GrayFrame frame(grid.width, grid.height);
  std::transform(grid.sums.begin(), grid.sums.end(), frame.values.begin(), sigmoid_value);
  return frame;
}

inline GrayFrame binary_render(const PolarityGrid& grid) {
  GrayFrame frame(grid.width, grid.height);
  std::transform(grid.sums.begin(), grid.sums.end(), frame.values.begin(),
                 [](std::int32_t x) -> std::uint8_t { return x != 0 ? 255 : 0; });
  return frame;
}

inline GrayFrame render(const PolarityGrid& grid, Representation rep) {
  return rep == Representation::Sigmoid ? sigmoid_render(grid) : binary_render(grid);
}

/// Debug view of raw sums: x + 128 clamped to [0, 255]. Lossy for |x| > 127.
inline GrayFrame debug_render(const PolarityGrid& grid) {
  GrayFrame frame(grid.width, grid.height);
  std::transform(grid.sums.begin(), grid.sums.end(), frame.values.begin(), [](std::int32_t x) {
    return static_cast<std::uint8_t>(std::clamp<std::int64_t>(std::int64_t(x) + 128, 0, 255));
  });
  return frame;
}

}  // namespace evdet
