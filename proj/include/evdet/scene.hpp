#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "evdet/detections.hpp"
#include "evdet/dvs_sim.hpp"
#include "evdet/event_model.hpp"
#include "evdet/geometry.hpp"

namespace evdet {

// Scripted synthetic scene: a square translating at constant velocity over a
// dark uniform background. Its position is known analytically, so every event
// window has an exact ground-truth box.
//
// The square carries a log-linear horizontal intensity ramp. With at least
// 0.5 px/ms of horizontal speed every covered pixel changes monotonically by
// more than one default threshold per 10 ms window, so the swept area never
// has interior pixels whose polarities cancel out.

struct MovingSquareScene {
  std::uint16_t width = kDefaultWidth;
  std::uint16_t height = kDefaultHeight;
  double side = 40;             ///< px
  double x0 = 20, y0 = 100;     ///< top-left at t = 0
  double vx = 0.6, vy = 0.15;   ///< px per ms
  std::uint64_t duration_us = 300'000;
  std::uint64_t frame_interval_us = 500;
  double background = 0.05;
  double ramp_low = 0.2;    ///< intensity at the left edge
  double ramp_high = 0.95;  ///< intensity at the right edge
  /// Uniform background-activity noise, events per second over the sensor.
  double noise_rate_hz = 5'000;
  std::uint64_t seed = 1;

  double x_at(std::uint64_t t) const { return x0 + vx * double(t) / 1000.0; }
  double y_at(std::uint64_t t) const { return y0 + vy * double(t) / 1000.0; }

  /// Square extent swept during [t0, t0 + duration).
  BoundingBox swept_box(std::uint64_t t0, std::uint64_t duration) const {
    const std::uint64_t t1 = t0 + duration;
    BoundingBox b;
    b.x0 = std::min(x_at(t0), x_at(t1));
    b.y0 = std::min(y_at(t0), y_at(t1));
    b.x1 = std::max(x_at(t0), x_at(t1)) + side;
    b.y1 = std::max(y_at(t0), y_at(t1)) + side;
    b.class_label = "object";
    b.confidence = 1.0;
    return *clip_to(b, {width, height});
  }
};

/// Scene with start position and velocity drawn from `seed`, kept inside the
/// sensor for the whole duration. `moving = false` freezes the square.
inline MovingSquareScene scripted_scene(std::uint64_t seed, bool moving = true) {
  MovingSquareScene s;
  s.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> speed(0.5, 0.8), drift(-0.25, 0.25), unit(0.0, 1.0);
  const double ms = double(s.duration_us) / 1000.0;
  s.vx = moving ? speed(rng) * (unit(rng) < 0.5 ? -1 : 1) : 0.0;
  s.vy = moving ? drift(rng) : 0.0;
  const double travel_x = std::abs(s.vx) * ms, travel_y = std::abs(s.vy) * ms;
  const double room_x = s.width - s.side - travel_x - 2, room_y = s.height - s.side - travel_y - 2;
  const double start_x = 1 + unit(rng) * std::max(0.0, room_x);
  const double start_y = 1 + unit(rng) * std::max(0.0, room_y);
  s.x0 = s.vx >= 0 ? start_x : start_x + travel_x;
  s.y0 = s.vy >= 0 ? start_y : start_y + travel_y;
  return s;
}

inline IntensitySequence render_scene(const MovingSquareScene& s) {
  IntensitySequence seq{s.width, s.height, {}};
  for (std::uint64_t t = 0; t <= s.duration_us; t += s.frame_interval_us) {
    IntensityFrame frame{t, std::vector<double>(std::size_t(s.width) * s.height, s.background)};
    const double sx = s.x_at(t), sy = s.y_at(t);
    const auto px0 = std::max<std::int64_t>(0, std::int64_t(std::floor(sx)));
    const auto py0 = std::max<std::int64_t>(0, std::int64_t(std::floor(sy)));
    const auto px1 = std::min<std::int64_t>(s.width, std::int64_t(std::ceil(sx + s.side)) + 1);
    const auto py1 = std::min<std::int64_t>(s.height, std::int64_t(std::ceil(sy + s.side)) + 1);
    for (std::int64_t py = py0; py < py1; ++py)
      for (std::int64_t px = px0; px < px1; ++px) {
        const double u = px + 0.5 - sx, v = py + 0.5 - sy;
        if (u < 0 || v < 0 || u >= s.side || v >= s.side) continue;
        frame.values[std::size_t(py) * s.width + std::size_t(px)] =
            s.ramp_low * std::pow(s.ramp_high / s.ramp_low, u / s.side);
      }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

/// Simulated events of the scene plus seeded background noise, time-sorted.
inline EventStream simulate_scene(const MovingSquareScene& s, const SimParams& params = {}) {
  EventStream stream = simulate_events(render_scene(s), params);
  const auto noise_count =
      static_cast<std::size_t>(s.noise_rate_hz * double(s.duration_us) / 1e6);
  if (noise_count == 0) return stream;

  std::mt19937_64 rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::uint64_t> t_dist(0, s.duration_us - 1);
  std::uniform_int_distribution<std::uint16_t> x_dist(0, s.width - 1), y_dist(0, s.height - 1);
  std::vector<Event> noise(noise_count);
  for (auto& e : noise) {
    e.t = t_dist(rng);
    e.x = x_dist(rng);
    e.y = y_dist(rng);
    e.polarity = (rng() & 1) ? 1 : -1;
  }
  std::stable_sort(noise.begin(), noise.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  std::vector<Event> merged;
  merged.reserve(stream.events.size() + noise.size());
  std::merge(stream.events.begin(), stream.events.end(), noise.begin(), noise.end(),
             std::back_inserter(merged), [](const Event& a, const Event& b) { return a.t < b.t; });
  stream.events = std::move(merged);
  return stream;
}

}  // namespace evdet
