#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdet/baseline_detector.hpp"
#include "evdet/config.hpp"
#include "evdet/detections.hpp"
#include "evdet/evaluation.hpp"
#include "evdet/frame_synthesis.hpp"
#include "evdet/pgm.hpp"
#include "evdet/pseudolabel.hpp"
#include "evdet/scene.hpp"

namespace evdet {

/// Outcome of simulate -> bin -> blob detect -> evaluate on a scripted scene.
struct DemoReport {
  std::uint64_t seed = 0;
  bool moving = true;
  std::size_t windows = 0;
  std::size_t events = 0;
  std::size_t detections = 0;
  /// Windows whose best blob overlaps the scripted box with IoU >= 0.5.
  std::size_t windows_hit = 0;
  std::vector<ThresholdReport> thresholds;
  std::optional<double> fraction_detected;

  double hit_rate() const { return windows ? double(windows_hit) / double(windows) : 0.0; }
};

inline nlohmann::ordered_json to_json(const DemoReport& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["moving"] = r.moving;
  j["windows"] = r.windows;
  j["events"] = r.events;
  j["detections"] = r.detections;
  j["windows_hit"] = r.windows_hit;
  j["hit_rate"] = r.hit_rate();
  auto blocks = nlohmann::ordered_json::array();
  for (const auto& t : r.thresholds) blocks.push_back(to_json(t));
  j["thresholds"] = std::move(blocks);
  j["fraction_detected"] =
      r.fraction_detected ? nlohmann::ordered_json(*r.fraction_detected) : nlohmann::ordered_json(nullptr);
  return j;
}

/// Runs the scripted demo. When `out_dir` is non-empty, writes events, frames,
/// detections, ground truth, the effective config and the report there.
inline DemoReport run_demo(const PipelineConfig& config, bool moving = true,
                           const std::string& out_dir = "") {
  config.validate();
  MovingSquareScene scene = scripted_scene(config.seed, moving);
  scene.width = config.sensor_width;
  scene.height = config.sensor_height;
  const EventStream stream =
      simulate_scene(scene, SimParams{config.contrast_threshold, config.refractory_us});

  const std::uint64_t window = config.window_duration_us;
  const std::size_t count = std::size_t(scene.duration_us / window);
  const auto grids = window_sequence(stream, 0, window, count);

  DemoReport report;
  report.seed = config.seed;
  report.moving = moving;
  report.windows = grids.size();
  report.events = stream.events.size();

  std::vector<DetectionSet> dets, gts;
  for (const auto& grid : grids) {
    const std::string id = window_stem("demo", grid.t0);
    DetectionSet d = detect_blobs(grid, config.blob_params());
    d.frame_id = id;
    d.t = grid.t0;
    report.detections += d.boxes.size();

    DetectionSet g{id, grid.t0, {}, "script"};
    if (moving) g.boxes.push_back(scene.swept_box(grid.t0, window));

    double best = 0;
    for (const auto& b : d.boxes)
      for (const auto& truth : g.boxes) best = std::max(best, iou(b, truth));
    if (!g.boxes.empty() && best >= 0.5) ++report.windows_hit;

    dets.push_back(std::move(d));
    gts.push_back(std::move(g));
  }

  for (double thr : config.eval_iou) {
    MatchOptions opts{thr, config.min_height_px, config.ignore_on_filtered_gt};
    report.thresholds.push_back(evaluate_at(dets, gts, opts, config.interpolation));
  }
  const Coverage cov = ground_truth_coverage(dets, gts, kDefaultEvalIou, config.min_height_px);
  if (cov.gt_count() > 0) report.fraction_detected = cov.fraction();

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "frames");
    save_events((fs::path(out_dir) / "events.evt1").string(), stream);
    for (const auto& grid : grids)
      write_pgm((fs::path(out_dir) / "frames" / (window_stem("demo", grid.t0) + ".pgm")).string(),
                render(grid, config.representation));
    save_detections((fs::path(out_dir) / "detections.jsonl").string(), dets);
    save_detections((fs::path(out_dir) / "ground_truth.jsonl").string(), gts);
    std::ofstream(fs::path(out_dir) / "config.json") << to_json(config).dump(2) << '\n';
    std::ofstream(fs::path(out_dir) / "report.json") << to_json(report).dump(2) << '\n';
  }
  return report;
}

}  // namespace evdet
