#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdet/errors.hpp"
#include "evdet/geometry.hpp"

namespace evdet {

/// Boxes reported for one frame by one detector (or a fused pool).
struct DetectionSet {
  std::string frame_id;
  std::uint64_t t = 0;  ///< microseconds
  std::vector<BoundingBox> boxes;
  std::string source;

  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

// Detections JSONL: one object per box,
//   {"frame_id": str, "t_us": int, "class": str, "conf": float,
//    "x0": float, "y0": float, "x1": float, "y1": float[, "source": str]}
// Coordinates are sensor-frame pixels.

/// Groups lines by frame_id in order of first appearance; boxes keep file
/// order. Boxes without a "source" key take `default_source`.
inline std::vector<DetectionSet> parse_detections_jsonl(std::istream& in,
                                                        const std::string& default_source = "") {
  std::vector<DetectionSet> sets;
  std::unordered_map<std::string, std::size_t> by_id;
  std::string line;
  std::size_t line_no = 0, record = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "expected a JSON object");
    auto need = [&](const char* key, bool ok) {
      if (!obj.contains(key) || !ok) throw ParseError(line_no, std::string("bad or missing \"") + key + "\"");
    };
    need("frame_id", obj.contains("frame_id") && obj["frame_id"].is_string());
    need("t_us", obj.contains("t_us") && obj["t_us"].is_number_unsigned());
    need("class", obj.contains("class") && obj["class"].is_string());
    for (const char* key : {"conf", "x0", "y0", "x1", "y1"})
      need(key, obj.contains(key) && obj[key].is_number());
    if (obj.contains("source") && !obj["source"].is_string())
      throw ParseError(line_no, "bad \"source\"");

    BoundingBox box;
    box.x0 = obj["x0"].get<double>();
    box.y0 = obj["y0"].get<double>();
    box.x1 = obj["x1"].get<double>();
    box.y1 = obj["y1"].get<double>();
    box.confidence = obj["conf"].get<double>();
    box.class_label = obj["class"].get<std::string>();
    box.source = obj.contains("source") ? obj["source"].get<std::string>() : default_source;
    const auto frame_id = obj["frame_id"].get<std::string>();
    const auto t = obj["t_us"].get<std::uint64_t>();
    if (frame_id.empty())
      throw ValidationError("line " + std::to_string(line_no) + ": empty frame_id", record);
    try {
      require_valid(box, record);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what(), record);
    }

    auto [it, inserted] = by_id.try_emplace(frame_id, sets.size());
    if (inserted) sets.push_back(DetectionSet{frame_id, t, {}, box.source});
    DetectionSet& set = sets[it->second];
    if (set.t != t)
      throw ValidationError("line " + std::to_string(line_no) + ": frame " + frame_id +
                                " has conflicting t_us",
                            record);
    set.boxes.push_back(std::move(box));
    ++record;
  }
  return sets;
}

inline std::vector<DetectionSet> ingest_detections(const std::string& path,
                                                   const std::string& default_source = "") {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_detections_jsonl(in, default_source);
}

inline void write_detections_jsonl(std::ostream& out, const std::vector<DetectionSet>& sets) {
  for (const auto& set : sets) {
    for (const auto& b : set.boxes) {
      nlohmann::ordered_json obj;
      obj["frame_id"] = set.frame_id;
      obj["t_us"] = set.t;
      obj["class"] = b.class_label;
      obj["conf"] = b.confidence;
      obj["x0"] = b.x0;
      obj["y0"] = b.y0;
      obj["x1"] = b.x1;
      obj["y1"] = b.y1;
      const std::string& source = b.source.empty() ? set.source : b.source;
      if (!source.empty()) obj["source"] = source;
      out << obj.dump() << '\n';
    }
  }
}

inline void save_detections(const std::string& path, const std::vector<DetectionSet>& sets) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_detections_jsonl(out, sets);
}

/// Applies `fn` to the box list of every set, keeping frame metadata.
template <typename Fn>
DetectionSet map_boxes(const DetectionSet& set, Fn&& fn) {
  DetectionSet out{set.frame_id, set.t, fn(set.boxes), set.source};
  return out;
}

inline DetectionSet nms(const DetectionSet& set, double iou_threshold) {
  return map_boxes(set, [&](const auto& boxes) { return nms(boxes, iou_threshold); });
}

inline DetectionSet filter_min_height(const DetectionSet& set, double min_height) {
  return map_boxes(set, [&](const auto& boxes) { return filter_min_height(boxes, min_height); });
}

}  // namespace evdet
