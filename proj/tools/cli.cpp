#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evdet/evdet.hpp"

namespace evdet::cli {
namespace {

namespace fs = std::filesystem;

// Flags mirroring PipelineConfig. Values from --config are loaded first and
// then overridden by any flag given explicitly.
struct ConfigFlags {
  std::string config_path;
  PipelineConfig values;  // parse targets only
  std::string representation, alignment, interpolation;
  std::vector<double> ratios;
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> setters;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config file (flags override it)");
    bind(app.add_option("--window-us", values.window_duration_us, "event window duration (us)"),
         [this](PipelineConfig& c) { c.window_duration_us = values.window_duration_us; });
    bind(app.add_option("--representation", representation, "sigmoid | binary")
             ->check(CLI::IsMember({"sigmoid", "binary"})),
         [this](PipelineConfig& c) { c.representation = parse_representation(representation); });
    bind(app.add_option("--confidence", values.confidence_threshold, "pseudo-label confidence threshold"),
         [this](PipelineConfig& c) { c.confidence_threshold = values.confidence_threshold; });
    bind(app.add_option("--display-threshold", values.display_threshold, "overlay confidence threshold"),
         [this](PipelineConfig& c) { c.display_threshold = values.display_threshold; });
    bind(app.add_option("--nms-iou", values.nms_iou, "fusion NMS IoU threshold"),
         [this](PipelineConfig& c) { c.nms_iou = values.nms_iou; });
    bind(app.add_option("--eval-iou", values.eval_iou, "evaluation IoU thresholds")->delimiter(','),
         [this](PipelineConfig& c) { c.eval_iou = values.eval_iou; });
    bind(app.add_option("--min-height", values.min_height_px, "minimum box height (px)"),
         [this](PipelineConfig& c) { c.min_height_px = values.min_height_px; });
    bind(app.add_option("--ratios", ratios, "train,val,test ratios")->delimiter(',')->expected(3),
         [this](PipelineConfig& c) { std::copy(ratios.begin(), ratios.end(), c.split_ratios.begin()); });
    bind(app.add_option("--alignment", alignment, "preceding | following")
             ->check(CLI::IsMember({"preceding", "following"})),
         [this](PipelineConfig& c) { c.alignment = parse_alignment(alignment); });
    bind(app.add_option("--interpolation", interpolation, "all-point | 11-point")
             ->check(CLI::IsMember({"all-point", "11-point"})),
         [this](PipelineConfig& c) {
           c.interpolation = interpolation == "11-point" ? ApInterpolation::ElevenPoint : ApInterpolation::AllPoint;
         });
    bind(app.add_flag("--dont-care", values.ignore_on_filtered_gt,
                      "ignore detections on ground truth removed by the height filter"),
         [this](PipelineConfig& c) { c.ignore_on_filtered_gt = values.ignore_on_filtered_gt; });
    bind(app.add_option("--width", values.sensor_width, "sensor width (CSV input, simulation)"),
         [this](PipelineConfig& c) { c.sensor_width = values.sensor_width; });
    bind(app.add_option("--height", values.sensor_height, "sensor height (CSV input, simulation)"),
         [this](PipelineConfig& c) { c.sensor_height = values.sensor_height; });
    bind(app.add_option("--contrast-threshold", values.contrast_threshold, "simulator log threshold"),
         [this](PipelineConfig& c) { c.contrast_threshold = values.contrast_threshold; });
    bind(app.add_option("--refractory-us", values.refractory_us, "simulator refractory period (us)"),
         [this](PipelineConfig& c) { c.refractory_us = values.refractory_us; });
    bind(app.add_option("--min-area", values.blob_min_area, "blob detector minimum area (px)"),
         [this](PipelineConfig& c) { c.blob_min_area = values.blob_min_area; });
    bind(app.add_option("--connectivity", values.blob_connectivity, "blob connectivity (4 or 8)"),
         [this](PipelineConfig& c) { c.blob_connectivity = values.blob_connectivity; });
    bind(app.add_option("--seed", values.seed, "random seed"),
         [this](PipelineConfig& c) { c.seed = values.seed; });
  }

  void bind(CLI::Option* opt, std::function<void(PipelineConfig&)> apply) {
    setters.emplace_back(opt, std::move(apply));
  }

  PipelineConfig resolve() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    for (const auto& [opt, apply] : setters)
      if (opt->count() > 0) apply(c);
    c.validate();
    return c;
  }
};

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void echo_config(const fs::path& dir, const PipelineConfig& c) { write_json(dir / "config.json", to_json(c)); }

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

ImageSize parse_size(const std::string& s) {
  const auto x = s.find('x');
  std::uint32_t w = 0, h = 0;
  if (x == std::string::npos || !detail::parse_int(std::string_view(s).substr(0, x), w) ||
      !detail::parse_int(std::string_view(s).substr(x + 1), h) || w == 0 || h == 0)
    throw InputError("size must look like WIDTHxHEIGHT, got \"" + s + "\"");
  return {w, h};
}

std::uint64_t default_anchor(const EventStream& s, std::uint64_t window) {
  return s.events.empty() ? 0 : s.events.front().t / window * window;
}

// ---------------------------------------------------------------------------

struct Command {
  CLI::App* app;
  ConfigFlags flags;
  std::function<void()> run;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-camera frame synthesis, pseudo-labelling and detection evaluation", "evdet"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& help) -> Command& {
    auto cmd = std::make_unique<Command>();
    cmd->app = app.add_subcommand(name, help);
    cmd->flags.attach(*cmd->app);
    commands.push_back(std::move(cmd));
    return *commands.back();
  };

  // convert -----------------------------------------------------------------
  std::string conv_in, conv_out, conv_to;
  {
    auto& c = add("convert", "convert between EVT1 and CSV event files");
    c.app->add_option("--in", conv_in, "input events")->required();
    c.app->add_option("--out", conv_out, "output events")->required();
    c.app->add_option("--to", conv_to, "csv | evt1 (default: from --out extension)")
        ->check(CLI::IsMember({"csv", "evt1"}));
    c.run = [&, &flags = c.flags] {
      const auto cfg = flags.resolve();
      const EventStream s = load_events(conv_in, cfg.sensor_width, cfg.sensor_height);
      const bool to_csv = conv_to.empty() ? is_csv_path(conv_out) : conv_to == "csv";
      if (to_csv) {
        const std::string text = write_events_csv(s);
        write_file_bytes(conv_out, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
      } else {
        write_file_bytes(conv_out, write_events_binary(s));
      }
      out << "converted " << s.events.size() << " events (" << s.width << "x" << s.height << ") -> "
          << conv_out << '\n';
    };
  }

  // simulate ----------------------------------------------------------------
  std::string sim_index, sim_out;
  std::optional<std::uint64_t> sim_scene_seed;
  bool sim_static = false;
  {
    auto& c = add("simulate", "generate events from an intensity sequence or the scripted scene");
    auto* idx = c.app->add_option("--index", sim_index, "JSON index of PGM frames");
    auto* scene = c.app->add_option("--scene-seed", sim_scene_seed, "simulate the scripted moving-square scene");
    idx->excludes(scene);
    c.app->add_flag("--static", sim_static, "scripted scene without motion");
    c.app->add_option("--out", sim_out, "output events (EVT1, or CSV by extension)")->required();
    c.run = [&, &flags = c.flags] {
      const auto cfg = flags.resolve();
      const SimParams params{cfg.contrast_threshold, cfg.refractory_us};
      EventStream s;
      if (!sim_index.empty()) {
        s = simulate_events(load_intensity_sequence(sim_index), params);
      } else if (sim_scene_seed) {
        MovingSquareScene sc = scripted_scene(*sim_scene_seed, !sim_static);
        sc.width = cfg.sensor_width;
        sc.height = cfg.sensor_height;
        s = simulate_scene(sc, params);
      } else {
        throw InputError("simulate needs --index or --scene-seed");
      }
      save_events(sim_out, s);
      out << "simulated " << s.events.size() << " events -> " << sim_out << '\n';
    };
  }

  // bin ---------------------------------------------------------------------
  std::string bin_events, bin_out, bin_recording;
  std::optional<std::uint64_t> bin_anchor;
  std::optional<std::size_t> bin_count;
  {
    auto& c = add("bin", "bin events into fixed windows and render PGM frames");
    c.app->add_option("--events", bin_events, "input events")->required();
    c.app->add_option("--out-dir", bin_out, "output directory")->required();
    c.app->add_option("--recording", bin_recording, "frame name prefix (default: events file stem)");
    c.app->add_option("--anchor", bin_anchor, "first window start (us)");
    c.app->add_option("--count", bin_count, "number of windows (default: cover the stream)");
    c.run = [&, &flags = c.flags] {
      const auto cfg = flags.resolve();
      const EventStream s = load_events(bin_events, cfg.sensor_width, cfg.sensor_height);
      const std::uint64_t window = cfg.window_duration_us;
      const std::uint64_t anchor = bin_anchor.value_or(default_anchor(s, window));
      const std::size_t count = bin_count.value_or(windows_covering(s, anchor, window));
      const std::string rec = bin_recording.empty() ? fs::path(bin_events).stem().string() : bin_recording;
      fs::create_directories(bin_out);
      for (const auto& grid : window_sequence(s, anchor, window, count))
        write_pgm((fs::path(bin_out) / (window_stem(rec, grid.t0) + ".pgm")).string(),
                  render(grid, cfg.representation));
      echo_config(bin_out, cfg);
      out << "wrote " << count << " " << to_string(cfg.representation) << " frames to " << bin_out << '\n';
    };
  }

  // render ------------------------------------------------------------------
  std::string ren_frame, ren_dets, ren_frame_id, ren_out;
  {
    auto& c = add("render", "burn detection boxes into a frame");
    c.app->add_option("--frame", ren_frame, "input PGM")->required();
    c.app->add_option("--detections", ren_dets, "detections JSONL");
    c.app->add_option("--frame-id", ren_frame_id, "frame to draw (default: the only one, or the PGM stem)");
    c.app->add_option("--out", ren_out, "output PGM")->required();
    c.run = [&, &flags = c.flags] {
      const auto cfg = flags.resolve();
      GrayFrame frame = read_pgm(ren_frame);
      std::vector<BoundingBox> boxes;
      if (!ren_dets.empty()) {
        const auto sets = ingest_detections(ren_dets);
        const std::string id = ren_frame_id.empty() ? fs::path(ren_frame).stem().string() : ren_frame_id;
        const DetectionSet* chosen = nullptr;
        for (const auto& s : sets)
          if (s.frame_id == id) chosen = &s;
        if (!chosen && ren_frame_id.empty() && sets.size() == 1) chosen = &sets.front();
        if (chosen) boxes = chosen->boxes;
        else if (!ren_frame_id.empty() || sets.size() > 1)
          throw InputError("no detections for frame \"" + id + "\"");
      }
      write_pgm(ren_out, render_overlay(std::move(frame), boxes, cfg.display_threshold));
      out << "drew " << std::count_if(boxes.begin(), boxes.end(), [&](const BoundingBox& b) {
        return b.confidence >= cfg.display_threshold;
      }) << " boxes -> " << ren_out << '\n';
    };
  }

  // pseudolabel -------------------------------------------------------------
  std::string pl_events, pl_dets, pl_frames, pl_out, pl_recording, pl_detector_size, pl_pad = "trailing";
  {
    auto& c = add("pseudolabel", "turn APS detections into labels for event windows");
    c.app->add_option("--events", pl_events, "DVS events")->required();
    c.app->add_option("--detections", pl_dets, "APS detector output (JSONL)")->required();
    c.app->add_option("--frames", pl_frames, "APS frame list: JSON [{frame_id, t_us}] (default: detection frames)");
    c.app->add_option("--out-dir", pl_out, "output directory")->required();
    c.app->add_option("--recording", pl_recording, "file name prefix (default: events file stem)");
    c.app->add_option("--detector-size", pl_detector_size,
                      "WIDTHxHEIGHT of the detector input; boxes are letterbox-inverted");
    c.app->add_option("--pad", pl_pad, "letterbox padding placement")->check(CLI::IsMember({"trailing", "centered"}));
    c.run = [&, &flags = c.flags] {
      const auto cfg = flags.resolve();
      const EventStream stream = load_events(pl_events, cfg.sensor_width, cfg.sensor_height);
      const auto raw = ingest_detections(pl_dets, "aps");

      std::vector<ApsFrame> frames;
      if (!pl_frames.empty()) {
        const auto j = read_json(pl_frames);
        if (!j.is_array()) throw FormatError("frame list must be a JSON array");
        for (const auto& f : j) {
          if (!f.is_object() || !f.contains("frame_id") || !f["frame_id"].is_string() || !f.contains("t_us") ||
              !f["t_us"].is_number_unsigned())
            throw FormatError("frame entries need string frame_id and unsigned t_us");
          frames.push_back({f["frame_id"].get<std::string>(), f["t_us"].get<std::uint64_t>()});
        }
      } else {
        for (const auto& d : raw) frames.push_back({d.frame_id, d.t});
        std::stable_sort(frames.begin(), frames.end(), [](const ApsFrame& a, const ApsFrame& b) { return a.t < b.t; });
      }

      std::vector<DetectionSet> kept;
      for (const auto& d : raw) kept.push_back(filter_confidence(d, cfg.confidence_threshold));
      const FramePairing pairing = pair_frames(frames, cfg.window_duration_us, cfg.alignment);

      ExportOptions opts;
      opts.sensor = {stream.width, stream.height};
      opts.recording = pl_recording.empty() ? fs::path(pl_events).stem().string() : pl_recording;
      if (!pl_detector_size.empty())
        opts.letterbox = letterbox(opts.sensor, parse_size(pl_detector_size),
                                   pl_pad == "centered" ? PadPlacement::Centered : PadPlacement::Trailing);

      std::set<std::uint64_t> starts;
      for (const auto& p : pairing.pairs)
        if (!starts.insert(p.window_t0).second)
          throw InputError("two APS frames map to the window starting at " + std::to_string(p.window_t0));

      const fs::path dir(pl_out);
      const ExportReport report = export_labels(pairing, kept, (dir / "labels").string(), opts);
      fs::create_directories(dir / "frames");
      auto pairs_json = nlohmann::ordered_json::array();
      for (const auto& p : pairing.pairs) {
        const PolarityGrid grid = accumulate_window(stream, p.window_t0, p.window_duration);
        write_pgm((dir / "frames" / (window_stem(opts.recording, p.window_t0) + ".pgm")).string(),
                  render(grid, cfg.representation));
        pairs_json.push_back({{"frame_id", p.frame_id},
                              {"aps_t_us", p.aps_t},
                              {"window_t0_us", p.window_t0},
                              {"window_duration_us", p.window_duration}});
      }
      nlohmann::ordered_json pairing_json;
      pairing_json["alignment"] = to_string(pairing.alignment);
      pairing_json["pairs"] = std::move(pairs_json);
      write_json(dir / "pairing.json", pairing_json);

      nlohmann::ordered_json rep;
      rep["alignment"] = to_string(pairing.alignment);
      rep["frames"] = pairing.pairs.size();
      rep["label_files"] = report.files_written;
      rep["boxes_written"] = report.boxes_written;
      rep["boxes_skipped"] = report.boxes_skipped;
      write_json(dir / "report.json", rep);
      echo_config(dir, cfg);
      out << "paired " << pairing.pairs.size() << " frames (" << to_string(pairing.alignment) << "), wrote "
          << report.boxes_written << " labels, skipped " << report.boxes_skipped << '\n';
    };
  }

  // split -------------------------------------------------------------------
  std::string split_in, split_out;
  {
    auto& c = add("split", "assign whole recordings to train/val/test");
    c.app->add_option("--recordings", split_in, "JSON [{recording_id, scene, condition, duration_us}]")->required();
    c.app->add_option("--out", split_out, "manifest JSON")->required();
    c.run = [&, &flags = c.flags] {
      const auto cfg = flags.resolve();
      const auto m = build_split_manifest(recordings_from_json(read_json(split_in)), cfg.split_ratios);
      write_json(split_out, manifest_to_json(m));
      double total = 0;
      for (const auto& e : m.entries) total += double(e.recording.duration);
      for (Split s : {Split::Train, Split::Val, Split::Test})
        out << to_string(s) << ": " << m.split_count(s) << " recordings, "
            << 100.0 * double(m.split_duration(s)) / total << "% of duration\n";
    };
  }

  // detect ------------------------------------------------------------------
  std::string det_events, det_frame, det_frame_id, det_out, det_recording;
  std::optional<std::uint64_t> det_anchor;
  std::optional<std::size_t> det_count;
  {
    auto& c = add("detect", "baseline blob detector on event windows or a rendered frame");
    auto* ev = c.app->add_option("--events", det_events, "events to bin and detect on");
    auto* fr = c.app->add_option("--frame", det_frame, "rendered PGM frame (sigmoid or binary)");
    ev->excludes(fr);
    c.app->add_option("--frame-id", det_frame_id, "frame id for --frame (default: PGM stem)");
    c.app->add_option("--out", det_out, "detections JSONL")->required();
    c.app->add_option("--recording", det_recording, "frame id prefix (default: events file stem)");
    c.app->add_option("--anchor", det_anchor, "first window start (us)");
    c.app->add_option("--count", det_count, "number of windows");
    c.run = [&, &flags = c.flags] {
      const auto cfg = flags.resolve();
      std::vector<DetectionSet> sets;
      if (!det_frame.empty()) {
        DetectionSet d = detect_blobs(read_pgm(det_frame), cfg.blob_params());
        d.frame_id = det_frame_id.empty() ? fs::path(det_frame).stem().string() : det_frame_id;
        sets.push_back(std::move(d));
      } else if (!det_events.empty()) {
        const EventStream s = load_events(det_events, cfg.sensor_width, cfg.sensor_height);
        const std::uint64_t window = cfg.window_duration_us;
        const std::uint64_t anchor = det_anchor.value_or(default_anchor(s, window));
        const std::size_t count = det_count.value_or(windows_covering(s, anchor, window));
        const std::string rec = det_recording.empty() ? fs::path(det_events).stem().string() : det_recording;
        for (const auto& grid : window_sequence(s, anchor, window, count)) {
          DetectionSet d = detect_blobs(grid, cfg.blob_params());
          d.frame_id = window_stem(rec, grid.t0);
          sets.push_back(std::move(d));
        }
      } else {
        throw InputError("detect needs --events or --frame");
      }
      save_detections(det_out, sets);
      std::size_t n = 0;
      for (const auto& s : sets) n += s.boxes.size();
      out << "detected " << n << " blobs in " << sets.size() << " frames -> " << det_out << '\n';
    };
  }

  // fuse --------------------------------------------------------------------
  std::string fuse_a, fuse_b, fuse_out;
  {
    auto& c = add("fuse", "pool two detectors' boxes per frame and apply NMS");
    c.app->add_option("--a", fuse_a, "first detections JSONL")->required();
    c.app->add_option("--b", fuse_b, "second detections JSONL")->required();
    c.app->add_option("--out", fuse_out, "fused detections JSONL")->required();
    c.run = [&, &flags = c.flags] {
      const auto cfg = flags.resolve();
      const auto a = ingest_detections(fuse_a, fs::path(fuse_a).stem().string());
      const auto b = ingest_detections(fuse_b, fs::path(fuse_b).stem().string());
      const auto fused = fuse_detections(a, b, cfg.nms_iou);
      save_detections(fuse_out, fused);
      std::size_t n = 0;
      for (const auto& s : fused) n += s.boxes.size();
      out << "fused " << fused.size() << " frames, " << n << " boxes kept (NMS IoU " << cfg.nms_iou << ")\n";
    };
  }

  // evaluate ----------------------------------------------------------------
  std::string ev_dets, ev_dets_b, ev_gt, ev_out;
  {
    auto& c = add("evaluate", "average precision and fraction-detected against ground truth");
    c.app->add_option("--detections", ev_dets, "detections JSONL")->required();
    c.app->add_option("--ground-truth", ev_gt, "ground truth JSONL")->required();
    c.app->add_option("--detections-b", ev_dets_b, "second detector, enables the set analysis");
    c.app->add_option("--out", ev_out, "report JSON");
    c.run = [&, &flags = c.flags] {
      const auto cfg = flags.resolve();
      const auto dets = ingest_detections(ev_dets);
      const auto gts = ingest_detections(ev_gt);
      nlohmann::ordered_json report;
      auto blocks = nlohmann::ordered_json::array();
      for (double thr : cfg.eval_iou) {
        const ThresholdReport r =
            evaluate_at(dets, gts, MatchOptions{thr, cfg.min_height_px, cfg.ignore_on_filtered_gt}, cfg.interpolation);
        out << "IoU " << thr << ": AP " << (r.ap ? std::to_string(*r.ap) : std::string("undefined")) << ", TP "
            << r.tp << ", FP " << r.fp << ", GT " << r.gt_count << '\n';
        blocks.push_back(to_json(r));
      }
      report["thresholds"] = std::move(blocks);
      auto fractions = nlohmann::ordered_json::array();
      for (double thr : cfg.eval_iou) {
        const Coverage cov = ground_truth_coverage(dets, gts, thr, cfg.min_height_px);
        if (cov.gt_count() == 0) continue;
        fractions.push_back({{"iou", thr}, {"fraction", cov.fraction()}});
      }
      report["fraction_detected"] = std::move(fractions);
      if (!ev_dets_b.empty()) {
        const auto dets_b = ingest_detections(ev_dets_b);
        auto sets = nlohmann::ordered_json::array();
        for (double thr : cfg.eval_iou) {
          const SetAnalysis s = set_analysis(dets, dets_b, gts, thr, cfg.min_height_px);
          auto j = to_json(s);
          j["iou"] = thr;
          sets.push_back(std::move(j));
          out << "IoU " << thr << ": A " << s.frac_a << ", B " << s.frac_b << ", A&B " << s.frac_intersection
              << ", A|B " << s.frac_union << '\n';
        }
        report["set_analysis"] = std::move(sets);
      }
      if (!ev_out.empty()) write_json(ev_out, report);
    };
  }

  // demo --------------------------------------------------------------------
  std::string demo_out;
  bool demo_static = false;
  {
    auto& c = add("demo", "simulate -> bin -> blob detect -> evaluate on a scripted scene");
    c.app->add_option("--out-dir", demo_out, "output directory (optional)");
    c.app->add_flag("--static", demo_static, "zero-motion scene");
    c.run = [&, &flags = c.flags] {
      const auto cfg = flags.resolve();
      const DemoReport r = run_demo(cfg, !demo_static, demo_out);
      out << to_json(r).dump(2) << '\n';
    };
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& c : commands)
      if (c->app->parsed()) err << c->app->help();
    return kUsage;
  }

  try {
    for (const auto& c : commands)
      if (c->app->parsed()) c->run();
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace evdet::cli
