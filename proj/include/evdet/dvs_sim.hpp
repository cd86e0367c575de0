#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdet/errors.hpp"
#include "evdet/event_model.hpp"
#include "evdet/frame_synthesis.hpp"
#include "evdet/pgm.hpp"

namespace evdet {

struct IntensityFrame {
  std::uint64_t t = 0;          ///< microseconds
  std::vector<double> values;   ///< row-major, each in (0, 1]
};

/// Frames with strictly increasing timestamps and strictly positive
/// intensities.
struct IntensitySequence {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<IntensityFrame> frames;
};

struct SimParams {
  double contrast_threshold = 0.15;  ///< log-intensity units, > 0
  std::uint64_t refractory_us = 0;
};

inline void validate_sequence(const IntensitySequence& seq) {
  if (seq.width == 0 || seq.height == 0) throw InputError("sequence width and height must be >= 1");
  const std::size_t n = std::size_t(seq.width) * seq.height;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const auto& frame = seq.frames[f];
    if (frame.values.size() != n)
      throw InputError("frame " + std::to_string(f) + " has wrong pixel count");
    if (f > 0 && frame.t <= seq.frames[f - 1].t)
      throw InputError("frame timestamps must be strictly increasing (frame " +
                       std::to_string(f) + ")");
    for (double v : frame.values)
      if (!(v > 0.0) || !std::isfinite(v))
        throw InputError("intensities must be finite and > 0 (frame " + std::to_string(f) + ")");
  }
}

/// Log-threshold event generation.
///
/// Each pixel keeps a reference level, initialised to its frame-0 log
/// intensity. Log intensity is interpolated linearly between frames; every
/// crossing of reference +/- threshold emits one event at the interpolated
/// time (rounded to the nearest microsecond) and moves the reference by one
/// threshold. Levels are tracked as integer multiples of the threshold above
/// log(I / I0), so a global gain on the input cancels out. Crossings within
/// 1e-9 threshold of a level count as reached.
///
/// With a refractory period, a pixel's event closer than `refractory_us` to
/// its previous emitted event is dropped; the reference still moves.
///
/// Output is ordered by timestamp, ties by raster order (y, then x), then by
/// emission order within the pixel.
inline EventStream simulate_events(const IntensitySequence& seq, const SimParams& params) {
  if (seq.frames.size() < 2) throw InputError("simulation needs at least 2 frames");
  if (!(params.contrast_threshold > 0.0)) throw InputError("contrast threshold must be > 0");
  validate_sequence(seq);

  const std::size_t n = std::size_t(seq.width) * seq.height;
  const double threshold = params.contrast_threshold;
  const double eps = 1e-9 * threshold;
  const auto& base = seq.frames.front().values;

  std::vector<std::int64_t> level(n, 0);
  std::vector<std::uint64_t> last_emit(n, 0);
  std::vector<bool> has_emitted(n, false);
  std::vector<double> prev(n, 0.0), cur(n);

  EventStream out{seq.width, seq.height, {}};
  for (std::size_t f = 1; f < seq.frames.size(); ++f) {
    const auto& frame = seq.frames[f];
    const std::uint64_t ta = seq.frames[f - 1].t;
    const double span = double(frame.t - ta);
    for (std::size_t p = 0; p < n; ++p) cur[p] = std::log(frame.values[p] / base[p]);

    for (std::size_t p = 0; p < n; ++p) {
      const double ra = prev[p];
      const double rb = cur[p];
      if (rb == ra) continue;
      const int dir = rb > ra ? 1 : -1;
      while (true) {
        const double target = double(level[p] + dir) * threshold;
        if (dir > 0 ? target > rb + eps : target < rb - eps) break;
        level[p] += dir;
        const double frac = std::clamp((target - ra) / (rb - ra), 0.0, 1.0);
        const std::uint64_t t = ta + static_cast<std::uint64_t>(std::llround(frac * span));
        if (params.refractory_us > 0 && has_emitted[p] && t - last_emit[p] < params.refractory_us)
          continue;
        has_emitted[p] = true;
        last_emit[p] = t;
        out.events.push_back({t, static_cast<std::uint16_t>(p % seq.width),
                              static_cast<std::uint16_t>(p / seq.width),
                              static_cast<std::int8_t>(dir)});
      }
    }
    prev.swap(cur);
  }

  std::stable_sort(out.events.begin(), out.events.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  return out;
}

/// Brute-force reference for window accumulation: visits every event, no
/// reliance on ordering. Kept deliberately naive.
inline PolarityGrid oracle_polarity_sums(const EventStream& stream, std::uint64_t t0,
                                         std::uint64_t duration) {
  if (duration == 0) throw InputError("window duration must be > 0");
  PolarityGrid grid(stream.width, stream.height, t0, duration);
  for (const Event& e : stream.events) {
    const bool inside = e.t >= t0 && e.t - t0 < duration;
    if (inside) grid.at(e.x, e.y) += e.polarity;
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Sequence files: a JSON index `[{"t_us": int, "path": str}, ...]` of P5 PGM
// frames (paths relative to the index). 8-bit value v maps to (v + 1) / 256.

inline IntensitySequence load_intensity_sequence(const std::string& index_path) {
  std::ifstream in(index_path);
  if (!in) throw IoError("cannot open " + index_path);
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("sequence index: " + std::string(e.what()));
  }
  if (!index.is_array()) throw FormatError("sequence index must be a JSON array");

  const auto dir = std::filesystem::path(index_path).parent_path();
  IntensitySequence seq;
  for (const auto& entry : index) {
    if (!entry.is_object() || !entry.contains("t_us") || !entry.contains("path") ||
        !entry["t_us"].is_number_unsigned() || !entry["path"].is_string())
      throw FormatError("sequence index entries need unsigned \"t_us\" and string \"path\"");
    const GrayFrame gray = read_pgm((dir / entry["path"].get<std::string>()).string());
    if (seq.frames.empty()) {
      seq.width = gray.width;
      seq.height = gray.height;
    } else if (gray.width != seq.width || gray.height != seq.height) {
      throw InputError("sequence frames differ in size");
    }
    IntensityFrame frame{entry["t_us"].get<std::uint64_t>(), {}};
    frame.values.reserve(gray.values.size());
    for (auto v : gray.values) frame.values.push_back((double(v) + 1.0) / 256.0);
    seq.frames.push_back(std::move(frame));
  }
  validate_sequence(seq);
  return seq;
}

/// Writes frames as `frame_NNNNNN.pgm` plus `index.json` into `dir`.
/// Intensities are quantized to the inverse of the loader's mapping.
inline void save_intensity_sequence(const std::string& dir, const IntensitySequence& seq) {
  std::filesystem::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    GrayFrame gray(seq.width, seq.height);
    for (std::size_t p = 0; p < gray.values.size(); ++p)
      gray.values[p] = static_cast<std::uint8_t>(
          std::clamp(std::lround(seq.frames[f].values[p] * 256.0 - 1.0), 0L, 255L));
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06zu.pgm", f);
    write_pgm((std::filesystem::path(dir) / name).string(), gray);
    index.push_back({{"t_us", seq.frames[f].t}, {"path", name}});
  }
  std::ofstream out(std::filesystem::path(dir) / "index.json");
  out << index.dump(2) << '\n';
}

}  // namespace evdet
