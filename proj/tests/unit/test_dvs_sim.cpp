#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "evdet/dvs_sim.hpp"
#include "evdet/frame_synthesis.hpp"
#include "oracles.hpp"

using namespace evdet;

namespace {

IntensitySequence one_pixel(std::vector<std::pair<std::uint64_t, double>> samples) {
  IntensitySequence seq{1, 1, {}};
  for (auto [t, v] : samples) seq.frames.push_back({t, {v}});
  return seq;
}

IntensitySequence random_scene(oracle::Rng& rng, double gain = 1.0) {
  IntensitySequence seq;
  seq.width = std::uint16_t(oracle::uniform(rng, 1, 24));
  seq.height = std::uint16_t(oracle::uniform(rng, 1, 24));
  const std::size_t frames = oracle::uniform(rng, 2, 12);
  std::uint64_t t = oracle::uniform(rng, 0, 1000);
  for (std::size_t f = 0; f < frames; ++f) {
    IntensityFrame fr{t, {}};
    for (std::size_t p = 0; p < std::size_t(seq.width) * seq.height; ++p)
      fr.values.push_back(gain * oracle::uniform_real(rng, 0.02, 1.0));
    seq.frames.push_back(std::move(fr));
    t += oracle::uniform(rng, 1, 5000);
  }
  return seq;
}

IntensitySequence scaled(IntensitySequence seq, double gain) {
  for (auto& f : seq.frames)
    for (auto& v : f.values) v *= gain;
  return seq;
}

}  // namespace

TEST(Simulator, RampCrossesTwoLevels) {
  const auto out = simulate_events(one_pixel({{0, 1.0}, {1000, std::exp(0.30)}}), {0.15, 0});
  ASSERT_EQ(out.events.size(), 2u);
  EXPECT_EQ(out.events[0], (Event{500, 0, 0, 1}));
  EXPECT_EQ(out.events[1], (Event{1000, 0, 0, 1}));
}

TEST(Simulator, DecreaseGivesNegativeEvents) {
  const auto out = simulate_events(one_pixel({{0, 1.0}, {100, std::exp(-0.46)}}), {0.15, 0});
  ASSERT_EQ(out.events.size(), 3u);
  for (const auto& e : out.events) EXPECT_EQ(e.polarity, -1);
}

TEST(Simulator, ConstantSceneIsSilent) {
  const auto out = simulate_events(one_pixel({{0, 0.4}, {10, 0.4}, {20, 0.4}}), {});
  EXPECT_TRUE(out.events.empty());
}

TEST(Simulator, LevelsPersistAcrossFrames) {
  // Up 0.1, up 0.1: the second step crosses the first level.
  const auto out = simulate_events(one_pixel({{0, 1.0}, {100, std::exp(0.1)}, {200, std::exp(0.2)}}), {0.15, 0});
  ASSERT_EQ(out.events.size(), 1u);
  EXPECT_EQ(out.events[0].t, 150u);
  // Wobbling inside one level band after the crossing stays silent.
  const auto osc = simulate_events(
      one_pixel({{0, 1.0}, {100, std::exp(0.2)}, {200, std::exp(0.1)}, {300, std::exp(0.2)}}), {0.15, 0});
  ASSERT_EQ(osc.events.size(), 1u);
}

TEST(Simulator, RefractorySuppressesButLevelAdvances) {
  const auto seq = one_pixel({{0, 1.0}, {1000, std::exp(0.6)}, {2000, 1.0}});
  const auto free = simulate_events(seq, {0.15, 0});
  EXPECT_EQ(free.events.size(), 8u);
  const auto refr = simulate_events(seq, {0.15, 300});
  std::vector<std::uint64_t> times;
  for (const auto& e : refr.events) times.push_back(e.t);
  EXPECT_EQ(times, (std::vector<std::uint64_t>{250, 750, 1250, 1750}));
  EXPECT_EQ(refr.events[2].polarity, -1);
}

TEST(Simulator, OutputSortedByTimeThenRaster) {
  oracle::Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto out = simulate_events(random_scene(rng), {});
    EXPECT_TRUE(validate_stream(out).ok());
    for (std::size_t k = 1; k < out.events.size(); ++k) {
      const auto& a = out.events[k - 1];
      const auto& b = out.events[k];
      EXPECT_TRUE(std::tie(a.t, a.y, a.x) <= std::tie(b.t, b.y, b.x));
    }
  }
}

TEST(Simulator, ClosedFormCountsOnMonotoneRamps) {
  oracle::Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const double a = oracle::uniform_real(rng, 0.01, 1.0), b = oracle::uniform_real(rng, 0.01, 1.0);
    const double thr = oracle::uniform_real(rng, 0.05, 0.5);
    const auto out = simulate_events(one_pixel({{0, a}, {10'000, b}}), {thr, 0});
    const long double delta = std::abs(std::log((long double)b) - std::log((long double)a));
    EXPECT_EQ(out.events.size(), std::size_t(std::floor(delta / thr))) << a << " " << b << " " << thr;
  }
}

TEST(Simulator, PowerOfTwoGainIsExactlyInvariant) {
  oracle::Rng rng(13);
  for (int i = 0; i < 30; ++i) {
    const auto seq = random_scene(rng);
    const auto base = simulate_events(seq, {});
    for (double g : {0.25, 2.0, 1024.0}) EXPECT_EQ(simulate_events(scaled(seq, g), {}), base);
  }
}

TEST(Simulator, RejectsBadInput) {
  EXPECT_THROW(simulate_events(one_pixel({{0, 1.0}}), {}), InputError);
  EXPECT_THROW(simulate_events(one_pixel({{0, 1.0}, {5, 0.0}}), {}), InputError);
  EXPECT_THROW(simulate_events(one_pixel({{5, 1.0}, {5, 0.5}}), {}), InputError);
  EXPECT_THROW(simulate_events(one_pixel({{0, 1.0}, {5, 0.5}}), {0.0, 0}), InputError);
}

TEST(Simulator, PolarityOracleAgreesWithScan) {
  oracle::Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    const auto s = oracle::random_stream(rng, 3000, 30);
    const std::uint64_t t0 = oracle::uniform(rng, 0, 1'200'000), d = oracle::uniform(rng, 1, 100'000);
    const auto ref = oracle::window_sums(s, t0, d);
    const auto got = oracle_polarity_sums(s, t0, d);
    ASSERT_TRUE(std::equal(ref.begin(), ref.end(), got.sums.begin()));
  }
}

TEST(SequenceFiles, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "evdet_seq_test";
  std::filesystem::remove_all(dir);
  IntensitySequence seq{2, 1, {{0, {1.0 / 256, 1.0}}, {40, {128.0 / 256, 200.0 / 256}}}};
  save_intensity_sequence(dir.string(), seq);
  const auto back = load_intensity_sequence((dir / "index.json").string());
  ASSERT_EQ(back.frames.size(), 2u);
  EXPECT_EQ(back.frames[1].t, 40u);
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t p = 0; p < 2; ++p) EXPECT_DOUBLE_EQ(back.frames[f].values[p], seq.frames[f].values[p]);
  std::filesystem::remove_all(dir);
}
