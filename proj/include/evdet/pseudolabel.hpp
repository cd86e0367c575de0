#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdet/detections.hpp"
#include "evdet/errors.hpp"
#include "evdet/geometry.hpp"

namespace evdet {

/// Pseudo-labels keep boxes scoring at least this much.
inline constexpr double kDefaultConfidenceThreshold = 0.5;

/// Keeps boxes with confidence >= threshold.
inline DetectionSet filter_confidence(const DetectionSet& dets, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InputError("confidence threshold must be in [0,1]");
  return map_boxes(dets, [&](const std::vector<BoundingBox>& boxes) {
    std::vector<BoundingBox> out;
    std::copy_if(boxes.begin(), boxes.end(), std::back_inserter(out),
                 [&](const BoundingBox& b) { return b.confidence >= threshold; });
    return out;
  });
}

// ---------------------------------------------------------------------------
// APS frame <-> event window pairing

enum class Alignment {
  Preceding,  ///< [T - duration, T): events leading up to the exposure
  Following,  ///< [T, T + duration)
};

inline std::string to_string(Alignment a) { return a == Alignment::Preceding ? "preceding" : "following"; }

inline Alignment parse_alignment(std::string_view s) {
  if (s == "preceding") return Alignment::Preceding;
  if (s == "following") return Alignment::Following;
  throw InputError("alignment must be \"preceding\" or \"following\", got \"" + std::string(s) + "\"");
}

struct FramePair {
  std::string frame_id;
  std::uint64_t aps_t = 0;
  std::uint64_t window_t0 = 0;
  std::uint64_t window_duration = 0;

  friend bool operator==(const FramePair&, const FramePair&) = default;
};

struct FramePairing {
  Alignment alignment = Alignment::Preceding;
  std::vector<FramePair> pairs;
};

struct ApsFrame {
  std::string frame_id;
  std::uint64_t t = 0;
};

/// One event window per APS frame. Windows may overlap when frames are
/// closer than `duration`. In preceding mode a frame earlier than `duration`
/// gets a window truncated at t = 0; a frame at t = 0 has no preceding events
/// and is rejected.
inline FramePairing pair_frames(const std::vector<ApsFrame>& frames, std::uint64_t duration,
                                Alignment alignment = Alignment::Preceding) {
  if (duration == 0) throw InputError("window duration must be > 0");
  FramePairing pairing{alignment, {}};
  pairing.pairs.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (i > 0 && f.t <= frames[i - 1].t)
      throw InputError("APS timestamps must be strictly increasing (frame " + f.frame_id + ")");
    if (alignment == Alignment::Preceding) {
      if (f.t == 0) throw InputError("frame " + f.frame_id + " at t=0 has no preceding window");
      const std::uint64_t t0 = f.t >= duration ? f.t - duration : 0;
      pairing.pairs.push_back({f.frame_id, f.t, t0, f.t - t0});
    } else {
      pairing.pairs.push_back({f.frame_id, f.t, f.t, duration});
    }
  }
  return pairing;
}

// ---------------------------------------------------------------------------
// Label files: one `class cx cy w h` line per box, normalized by the sensor
// size. Confidence is dropped: pseudo-labels become ground truth.

namespace detail {

inline std::string format_real(double v) {
  std::array<char, 32> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  std::string s(buf.data(), ptr);
  if (s.find_first_of(".e") == std::string::npos && s.find("inf") == std::string::npos &&
      s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

}  // namespace detail

inline std::string format_label_line(const BoundingBox& b, ImageSize sensor) {
  const double w = sensor.width, h = sensor.height;
  return b.class_label + " " + detail::format_real((b.x0 + b.x1) / 2 / w) + " " +
         detail::format_real((b.y0 + b.y1) / 2 / h) + " " + detail::format_real(b.width() / w) +
         " " + detail::format_real(b.height() / h);
}

/// Reads a label file back into sensor-pixel boxes (confidence 1).
inline std::vector<BoundingBox> parse_label_text(std::string_view text, ImageSize sensor) {
  std::vector<BoundingBox> boxes;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string label;
    double cx, cy, w, h;
    if (!(fields >> label >> cx >> cy >> w >> h)) throw ParseError(line_no, "expected `class cx cy w h`");
    std::string extra;
    if (fields >> extra) throw ParseError(line_no, "trailing fields");
    BoundingBox b;
    b.class_label = label;
    b.x0 = (cx - w / 2) * sensor.width;
    b.x1 = (cx + w / 2) * sensor.width;
    b.y0 = (cy - h / 2) * sensor.height;
    b.y1 = (cy + h / 2) * sensor.height;
    b.confidence = 1.0;
    if (!is_valid(b)) throw ParseError(line_no, "degenerate box");
    boxes.push_back(std::move(b));
  }
  return boxes;
}

/// `<recording>_<t0 zero-padded to 12 digits>`; sorts chronologically.
inline std::string window_stem(const std::string& recording, std::uint64_t t0) {
  char digits[32];
  std::snprintf(digits, sizeof digits, "%012llu", static_cast<unsigned long long>(t0));
  return recording + "_" + digits;
}

struct ExportReport {
  std::size_t files_written = 0;
  std::size_t boxes_written = 0;
  std::size_t boxes_skipped = 0;  ///< entirely outside the sensor
  std::vector<std::string> files;
};

struct ExportOptions {
  ImageSize sensor{346, 260};
  std::string recording = "rec";
  /// When set, boxes are in detector-input coordinates and are mapped back
  /// through this letterbox before export.
  std::optional<LetterboxTransform> letterbox;
};

/// Writes one label file per pairing window into `out_dir`. Frames absent from
/// `dets` (or with no boxes) get an empty file so negatives are represented.
inline ExportReport export_labels(const FramePairing& pairing, const std::vector<DetectionSet>& dets,
                                  const std::string& out_dir, const ExportOptions& options = {}) {
  std::unordered_map<std::string, const DetectionSet*> by_id;
  for (const auto& d : dets) by_id.emplace(d.frame_id, &d);
  std::filesystem::create_directories(out_dir);

  ExportReport report;
  for (const auto& pair : pairing.pairs) {
    std::string body;
    if (auto it = by_id.find(pair.frame_id); it != by_id.end()) {
      for (const auto& box : it->second->boxes) {
        std::optional<BoundingBox> mapped =
            options.letterbox ? invert(*options.letterbox, box) : clip_to(box, options.sensor);
        if (!mapped) {
          ++report.boxes_skipped;
          continue;
        }
        body += format_label_line(*mapped, options.sensor);
        body += '\n';
        ++report.boxes_written;
      }
    }
    const auto path = std::filesystem::path(out_dir) /
                      (window_stem(options.recording, pair.window_t0) + ".txt");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << body;
    report.files.push_back(path.string());
    ++report.files_written;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Train/val/test manifest

enum class Split { Train = 0, Val = 1, Test = 2 };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw InputError("unknown split \"" + std::string(s) + "\"");
}

struct RecordingInfo {
  std::string recording_id;
  std::string scene;
  std::string condition;
  std::uint64_t duration = 0;  ///< microseconds
};

struct ManifestEntry {
  RecordingInfo recording;
  Split split = Split::Train;
};

struct RecordingManifest {
  std::vector<ManifestEntry> entries;  ///< input order

  std::uint64_t split_duration(Split s) const {
    std::uint64_t total = 0;
    for (const auto& e : entries)
      if (e.split == s) total += e.recording.duration;
    return total;
  }
  std::size_t split_count(Split s) const {
    return std::size_t(std::count_if(entries.begin(), entries.end(),
                                     [&](const ManifestEntry& e) { return e.split == s; }));
  }
};

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultSplitRatios = {71, 15, 14};

/// Assigns whole recordings, longest first, to the split with the smallest
/// assigned-duration / target-fraction ratio (ties: train, val, test).
inline RecordingManifest build_split_manifest(const std::vector<RecordingInfo>& recordings,
                                              const SplitRatios& ratios = kDefaultSplitRatios) {
  for (double r : ratios)
    if (!(r > 0.0) || !std::isfinite(r)) throw InputError("split ratios must be positive");
  if (recordings.size() < ratios.size())
    throw InputError("need at least " + std::to_string(ratios.size()) + " recordings, got " +
                     std::to_string(recordings.size()));
  std::set<std::string> ids;
  for (const auto& r : recordings) {
    if (r.duration == 0) throw InputError("recording " + r.recording_id + " has zero duration");
    if (!ids.insert(r.recording_id).second)
      throw InputError("duplicate recording id " + r.recording_id);
  }

  const double sum = ratios[0] + ratios[1] + ratios[2];
  const std::array<double, 3> target = {ratios[0] / sum, ratios[1] / sum, ratios[2] / sum};

  std::vector<std::size_t> order(recordings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return recordings[a].duration > recordings[b].duration;
  });

  RecordingManifest manifest;
  manifest.entries.resize(recordings.size());
  std::array<double, 3> load{};
  for (std::size_t i : order) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < 3; ++s)
      if (load[s] / target[s] < load[best] / target[best]) best = s;
    load[best] += double(recordings[i].duration);
    manifest.entries[i] = {recordings[i], static_cast<Split>(best)};
  }
  return manifest;
}

inline nlohmann::ordered_json manifest_to_json(const RecordingManifest& m) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    nlohmann::ordered_json obj;
    obj["recording_id"] = e.recording.recording_id;
    obj["scene"] = e.recording.scene;
    obj["condition"] = e.recording.condition;
    obj["duration_us"] = e.recording.duration;
    obj["split"] = to_string(e.split);
    arr.push_back(std::move(obj));
  }
  return arr;
}

/// Reads recordings from a JSON array of {recording_id, scene, condition,
/// duration_us}; a "split" key, when present, is returned in `splits`.
inline std::vector<RecordingInfo> recordings_from_json(const nlohmann::json& arr,
                                                       std::vector<std::optional<Split>>* splits = nullptr) {
  if (!arr.is_array()) throw FormatError("recordings must be a JSON array");
  std::vector<RecordingInfo> out;
  for (const auto& obj : arr) {
    if (!obj.is_object() || !obj.contains("recording_id") || !obj["recording_id"].is_string() ||
        !obj.contains("duration_us") || !obj["duration_us"].is_number_unsigned())
      throw FormatError("recording entries need string recording_id and unsigned duration_us");
    RecordingInfo r;
    r.recording_id = obj["recording_id"].get<std::string>();
    r.scene = obj.value("scene", "");
    r.condition = obj.value("condition", "");
    r.duration = obj["duration_us"].get<std::uint64_t>();
    if (splits) {
      if (obj.contains("split") && obj["split"].is_string())
        splits->push_back(parse_split(obj["split"].get<std::string>()));
      else
        splits->push_back(std::nullopt);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline RecordingManifest manifest_from_json(const nlohmann::json& arr) {
  std::vector<std::optional<Split>> splits;
  auto recs = recordings_from_json(arr, &splits);
  RecordingManifest m;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!splits[i]) throw FormatError("manifest entry " + recs[i].recording_id + " lacks a split");
    m.entries.push_back({std::move(recs[i]), *splits[i]});
  }
  return m;
}

}  // namespace evdet
