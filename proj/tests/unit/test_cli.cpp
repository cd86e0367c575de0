#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "evdet/evdet.hpp"

using namespace evdet;
namespace fs = std::filesystem;

namespace {

struct Cli {
  fs::path dir;
  std::ostringstream out, err;

  explicit Cli(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Cli() { fs::remove_all(dir); }

  std::string p(const std::string& rel) const { return (dir / rel).string(); }

  int operator()(std::vector<std::string> args) {
    out.str("");
    err.str("");
    return cli::run(args, out, err);
  }
};

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

EventStream one_second() {
  EventStream s{8, 6, {}};
  for (std::uint64_t t = 0; t < 1'000'000; t += 997) s.events.push_back({t, std::uint16_t(t % 8), 3, 1});
  return s;
}

}  // namespace

TEST(Config, DefaultsAndJsonRoundTrip) {
  PipelineConfig c;
  EXPECT_EQ(c.window_duration_us, 10'000u);
  EXPECT_EQ(c.eval_iou, (std::vector<double>{0.5, 0.7}));
  EXPECT_EQ(c.split_ratios, (SplitRatios{71, 15, 14}));
  c.window_duration_us = 5000;
  c.representation = Representation::Binary;
  PipelineConfig back;
  merge_json(back, nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  PipelineConfig c;
  EXPECT_THROW(merge_json(c, nlohmann::json::parse(R"({"windw_us": 5})")), InputError);
  EXPECT_THROW(merge_json(c, nlohmann::json::parse(R"({"nms_iou": "high"})")), FormatError);
  c.nms_iou = 2;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(Cli, UsageErrorsExitOne) {
  Cli cli("evdet_cli_usage");
  EXPECT_EQ(cli({}), cli::kUsage);
  EXPECT_EQ(cli({"frobnicate"}), cli::kUsage);
  EXPECT_EQ(cli({"bin", "--events"}), cli::kUsage);
  EXPECT_EQ(cli({"bin", "--events", "x", "--out-dir", "y", "--representation", "grey"}), cli::kUsage);
  EXPECT_EQ(cli({"--help"}), cli::kOk);
  EXPECT_NE(cli.out.str().find("pseudolabel"), std::string::npos);
}

TEST(Cli, DataErrorsExitTwo) {
  Cli cli("evdet_cli_data");
  EXPECT_EQ(cli({"bin", "--events", cli.p("missing.evt1"), "--out-dir", cli.p("o")}), cli::kDataError);
  write_text(cli.p("bad.csv"), "t,x,y,p\n");
  EXPECT_EQ(cli({"convert", "--in", cli.p("bad.csv"), "--out", cli.p("x.evt1")}), cli::kDataError);
  EXPECT_NE(cli.err.str().find("error"), std::string::npos);
}

TEST(Cli, ConvertRoundTrip) {
  Cli cli("evdet_cli_convert");
  const auto s = one_second();
  save_events(cli.p("a.evt1"), s);
  ASSERT_EQ(cli({"convert", "--in", cli.p("a.evt1"), "--out", cli.p("a.csv")}), 0);
  ASSERT_EQ(cli({"convert", "--in", cli.p("a.csv"), "--out", cli.p("b.evt1"), "--width", "8", "--height", "6"}), 0);
  EXPECT_EQ(read_file_bytes(cli.p("a.evt1")), read_file_bytes(cli.p("b.evt1")));
}

TEST(Cli, BinOneSecondGivesHundredFrames) {
  Cli cli("evdet_cli_bin");
  save_events(cli.p("rec.evt1"), one_second());
  ASSERT_EQ(cli({"bin", "--events", cli.p("rec.evt1"), "--out-dir", cli.p("frames")}), 0) << cli.err.str();
  std::size_t pgms = 0;
  for (const auto& e : fs::directory_iterator(cli.p("frames"))) pgms += e.path().extension() == ".pgm";
  EXPECT_EQ(pgms, 100u);
  EXPECT_TRUE(fs::exists(cli.p("frames/rec_000000990000.pgm")));
  EXPECT_TRUE(fs::exists(cli.p("frames/config.json")));
}

TEST(Cli, EmptyWindowIsUniformMidGray) {
  Cli cli("evdet_cli_empty");
  save_events(cli.p("rec.evt1"), EventStream{8, 6, {{25'000, 1, 1, 1}}});
  ASSERT_EQ(cli({"bin", "--events", cli.p("rec.evt1"), "--out-dir", cli.p("f"), "--anchor", "0", "--count", "3"}), 0);
  const auto f = read_pgm(cli.p("f/rec_000000000000.pgm"));
  EXPECT_EQ(f.values, std::vector<std::uint8_t>(48, 128));
  const auto g = read_pgm(cli.p("f/rec_000000020000.pgm"));
  EXPECT_EQ(g.at(1, 1), sigmoid_value(1));
}

TEST(Cli, ConfigFileWithFlagOverride) {
  Cli cli("evdet_cli_config");
  save_events(cli.p("rec.evt1"), one_second());
  write_text(cli.p("cfg.json"), R"({"window_duration_us": 100000, "representation": "binary"})");
  ASSERT_EQ(cli({"bin", "--events", cli.p("rec.evt1"), "--out-dir", cli.p("f"), "--config", cli.p("cfg.json"),
                 "--window-us", "250000"}),
            0);
  const auto echoed = nlohmann::json::parse(std::ifstream(cli.p("f/config.json")));
  EXPECT_EQ(echoed["window_duration_us"], 250000);
  EXPECT_EQ(echoed["representation"], "binary");
  EXPECT_TRUE(fs::exists(cli.p("f/rec_000000750000.pgm")));
  EXPECT_FALSE(fs::exists(cli.p("f/rec_000001000000.pgm")));
}

TEST(Cli, PseudolabelDetectEvaluatePipeline) {
  Cli cli("evdet_cli_pipeline");
  ASSERT_EQ(cli({"simulate", "--scene-seed", "4", "--out", cli.p("scene.evt1")}), 0) << cli.err.str();
  ASSERT_EQ(cli({"detect", "--events", cli.p("scene.evt1"), "--out", cli.p("blobs.jsonl")}), 0) << cli.err.str();

  // Treat the detector output as the APS side: frames at each window end.
  auto sets = ingest_detections(cli.p("blobs.jsonl"));
  nlohmann::json frames = nlohmann::json::array();
  for (auto& s : sets) {
    s.t += 10'000;
    frames.push_back({{"frame_id", s.frame_id}, {"t_us", s.t}});
  }
  save_detections(cli.p("aps.jsonl"), sets);
  write_text(cli.p("frames.json"), frames.dump());
  ASSERT_EQ(cli({"pseudolabel", "--events", cli.p("scene.evt1"), "--detections", cli.p("aps.jsonl"), "--frames",
                 cli.p("frames.json"), "--out-dir", cli.p("pl"), "--recording", "scene"}),
            0)
      << cli.err.str();
  EXPECT_TRUE(fs::exists(cli.p("pl/labels/scene_000000000000.txt")));
  EXPECT_TRUE(fs::exists(cli.p("pl/frames/scene_000000000000.pgm")));
  const auto report = nlohmann::json::parse(std::ifstream(cli.p("pl/report.json")));
  EXPECT_EQ(report["frames"], sets.size());

  ASSERT_EQ(cli({"evaluate", "--detections", cli.p("blobs.jsonl"), "--ground-truth", cli.p("blobs.jsonl"),
                 "--detections-b", cli.p("blobs.jsonl"), "--out", cli.p("eval.json")}),
            0)
      << cli.err.str();
  const auto eval = nlohmann::json::parse(std::ifstream(cli.p("eval.json")));
  EXPECT_EQ(eval["thresholds"][0]["ap"], 1.0);
  EXPECT_EQ(eval["set_analysis"][0]["frac_union"], 1.0);

  ASSERT_EQ(cli({"fuse", "--a", cli.p("blobs.jsonl"), "--b", cli.p("blobs.jsonl"), "--out", cli.p("f.jsonl")}), 0);
  EXPECT_EQ(ingest_detections(cli.p("f.jsonl")).size(), ingest_detections(cli.p("blobs.jsonl")).size());

  ASSERT_EQ(cli({"render", "--frame", cli.p("pl/frames/scene_000000000000.pgm"), "--detections",
                 cli.p("blobs.jsonl"), "--frame-id", "scene_000000000000", "--out", cli.p("o.pgm")}),
            0)
      << cli.err.str();
  EXPECT_TRUE(fs::exists(cli.p("o.pgm")));
}

TEST(Cli, SplitWritesManifest) {
  Cli cli("evdet_cli_split");
  nlohmann::json recs = nlohmann::json::array();
  for (int i = 0; i < 6; ++i) recs.push_back({{"recording_id", "r" + std::to_string(i)}, {"duration_us", 100 + i}});
  write_text(cli.p("recs.json"), recs.dump());
  ASSERT_EQ(cli({"split", "--recordings", cli.p("recs.json"), "--out", cli.p("m.json"), "--ratios", "1,1,1"}), 0)
      << cli.err.str();
  const auto m = manifest_from_json(nlohmann::json::parse(std::ifstream(cli.p("m.json"))));
  EXPECT_EQ(m.split_count(Split::Val), 2u);
}

TEST(Demo, DeterministicAndStaticSceneIsQuiet) {
  PipelineConfig c;
  c.seed = 3;
  const auto a = run_demo(c, true);
  const auto b = run_demo(c, true);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_GE(a.hit_rate(), 0.9);
  const auto still = run_demo(c, false);
  EXPECT_EQ(still.detections, 0u);
}
