#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdet/baseline_detector.hpp"
#include "evdet/dvs_sim.hpp"
#include "evdet/errors.hpp"
#include "evdet/evaluation.hpp"
#include "evdet/frame_synthesis.hpp"
#include "evdet/pseudolabel.hpp"

namespace evdet {

inline std::string to_string(Representation r) { return r == Representation::Sigmoid ? "sigmoid" : "binary"; }

inline Representation parse_representation(const std::string& s) {
  if (s == "sigmoid") return Representation::Sigmoid;
  if (s == "binary") return Representation::Binary;
  throw InputError("representation must be \"sigmoid\" or \"binary\", got \"" + s + "\"");
}

/// Every tunable of the pipeline. Defaults reproduce the reference setup:
/// 10 ms windows, sigmoid frames, 0.5 pseudo-label confidence, NMS at 0.4,
/// evaluation at IoU 0.5 and 0.7 with a 25 px minimum height, 71/15/14 splits.
struct PipelineConfig {
  std::uint64_t window_duration_us = kDefaultWindowUs;
  Representation representation = Representation::Sigmoid;
  double confidence_threshold = kDefaultConfidenceThreshold;
  double display_threshold = 0.5;
  double nms_iou = kDefaultFusionIou;
  std::vector<double> eval_iou = {0.5, 0.7};
  double min_height_px = kDefaultMinHeight;
  SplitRatios split_ratios = kDefaultSplitRatios;
  Alignment alignment = Alignment::Preceding;
  ApInterpolation interpolation = ApInterpolation::AllPoint;
  bool ignore_on_filtered_gt = false;
  std::uint16_t sensor_width = kDefaultWidth;
  std::uint16_t sensor_height = kDefaultHeight;
  double contrast_threshold = 0.15;
  std::uint64_t refractory_us = 0;
  std::size_t blob_min_area = 20;
  int blob_connectivity = 4;
  std::uint64_t seed = 1;
  std::map<std::string, std::string> paths;

  void validate() const {
    auto unit = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) throw InputError(std::string(name) + " must be in [0,1]");
    };
    if (window_duration_us == 0) throw InputError("window_duration_us must be > 0");
    unit(confidence_threshold, "confidence_threshold");
    unit(display_threshold, "display_threshold");
    unit(nms_iou, "nms_iou");
    for (double v : eval_iou) unit(v, "eval_iou");
    if (!(min_height_px >= 0.0)) throw InputError("min_height_px must be >= 0");
    for (double r : split_ratios)
      if (!(r > 0.0)) throw InputError("split_ratios must be positive");
    if (sensor_width == 0 || sensor_height == 0) throw InputError("sensor size must be >= 1");
    if (!(contrast_threshold > 0.0)) throw InputError("contrast_threshold must be > 0");
    if (blob_min_area < 1) throw InputError("blob_min_area must be >= 1");
    if (blob_connectivity != 4 && blob_connectivity != 8) throw InputError("blob_connectivity must be 4 or 8");
  }

  BlobParams blob_params() const {
    BlobParams p;
    p.min_area = blob_min_area;
    p.connectivity = blob_connectivity;
    p.representation = representation;
    return p;
  }
};

inline nlohmann::ordered_json to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["window_duration_us"] = c.window_duration_us;
  j["representation"] = to_string(c.representation);
  j["confidence_threshold"] = c.confidence_threshold;
  j["display_threshold"] = c.display_threshold;
  j["nms_iou"] = c.nms_iou;
  j["eval_iou"] = c.eval_iou;
  j["min_height_px"] = c.min_height_px;
  j["split_ratios"] = c.split_ratios;
  j["alignment"] = to_string(c.alignment);
  j["interpolation"] = c.interpolation == ApInterpolation::AllPoint ? "all-point" : "11-point";
  j["ignore_on_filtered_gt"] = c.ignore_on_filtered_gt;
  j["sensor_width"] = c.sensor_width;
  j["sensor_height"] = c.sensor_height;
  j["contrast_threshold"] = c.contrast_threshold;
  j["refractory_us"] = c.refractory_us;
  j["blob_min_area"] = c.blob_min_area;
  j["blob_connectivity"] = c.blob_connectivity;
  j["seed"] = c.seed;
  j["paths"] = c.paths;
  return j;
}

/// Overlays the keys present in `j` onto `c`; unknown keys are rejected.
inline void merge_json(PipelineConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "window_duration_us") c.window_duration_us = v.get<std::uint64_t>();
      else if (key == "representation") c.representation = parse_representation(v.get<std::string>());
      else if (key == "confidence_threshold") c.confidence_threshold = v.get<double>();
      else if (key == "display_threshold") c.display_threshold = v.get<double>();
      else if (key == "nms_iou") c.nms_iou = v.get<double>();
      else if (key == "eval_iou") c.eval_iou = v.get<std::vector<double>>();
      else if (key == "min_height_px") c.min_height_px = v.get<double>();
      else if (key == "split_ratios") c.split_ratios = v.get<SplitRatios>();
      else if (key == "alignment") c.alignment = parse_alignment(v.get<std::string>());
      else if (key == "interpolation") {
        const auto s = v.get<std::string>();
        if (s == "all-point") c.interpolation = ApInterpolation::AllPoint;
        else if (s == "11-point") c.interpolation = ApInterpolation::ElevenPoint;
        else throw InputError("interpolation must be \"all-point\" or \"11-point\"");
      }
      else if (key == "ignore_on_filtered_gt") c.ignore_on_filtered_gt = v.get<bool>();
      else if (key == "sensor_width") c.sensor_width = v.get<std::uint16_t>();
      else if (key == "sensor_height") c.sensor_height = v.get<std::uint16_t>();
      else if (key == "contrast_threshold") c.contrast_threshold = v.get<double>();
      else if (key == "refractory_us") c.refractory_us = v.get<std::uint64_t>();
      else if (key == "blob_min_area") c.blob_min_area = v.get<std::size_t>();
      else if (key == "blob_connectivity") c.blob_connectivity = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "paths") c.paths = v.get<std::map<std::string, std::string>>();
      else throw InputError("unknown config key \"" + key + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  PipelineConfig c;
  try {
    merge_json(c, nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace evdet
