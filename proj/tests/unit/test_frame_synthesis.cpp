#include <gtest/gtest.h>

#include <cmath>

#include "evdet/frame_synthesis.hpp"
#include "evdet/pgm.hpp"
#include "oracles.hpp"

using namespace evdet;

TEST(Window, HalfOpenBounds) {
  const EventStream s{3, 1, {{99, 0, 0, 1}, {100, 0, 0, 1}, {150, 1, 0, -1}, {150, 1, 0, -1}, {200, 2, 0, 1}}};
  const auto g = accumulate_window(s, 100, 100);
  EXPECT_EQ(g.sums, (std::vector<std::int32_t>{1, -2, 0}));
  EXPECT_EQ(g.t0, 100u);
  EXPECT_EQ(g.duration, 100u);
}

TEST(Window, ZeroDurationRejected) {
  EXPECT_THROW(accumulate_window(EventStream{}, 0, 0), InputError);
  EXPECT_THROW(window_sequence(EventStream{}, 0, 0, 3), InputError);
}

TEST(Window, SequenceTilesAndConserves) {
  oracle::Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto s = oracle::random_stream(rng, 5000, 40);
    if (s.events.empty()) continue;
    const std::uint64_t d = oracle::uniform(rng, 1, 20'000);
    const std::uint64_t anchor = s.events.front().t;
    const std::size_t n = windows_covering(s, anchor, d);
    const auto grids = window_sequence(s, anchor, d, n);
    ASSERT_EQ(grids.size(), n);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_EQ(grids[k].t0, anchor + k * d);
      const auto ref = oracle::window_sums(s, grids[k].t0, d);
      ASSERT_TRUE(std::equal(ref.begin(), ref.end(), grids[k].sums.begin()));
    }
    // Each event lands in exactly one window.
    std::size_t counted = 0;
    for (std::size_t k = 0; k < n; ++k)
      for (const Event& e : s.events) counted += e.t >= grids[k].t0 && e.t < grids[k].t0 + d;
    EXPECT_EQ(counted, s.events.size());
  }
}

TEST(Window, EmptyWindowRendersMidGray) {
  const EventStream s{5, 4, {{50'000, 1, 1, 1}}};
  const auto g = accumulate_window(s, 0, 10'000);
  const auto f = sigmoid_render(g);
  for (auto v : f.values) EXPECT_EQ(v, 128);
  for (auto v : binary_render(g).values) EXPECT_EQ(v, 0);
}

TEST(Sigmoid, ReferenceValues) {
  EXPECT_EQ(sigmoid_value(0), 128);
  EXPECT_EQ(sigmoid_value(2), 186);
  EXPECT_EQ(sigmoid_value(-2), 69);
  EXPECT_EQ(sigmoid_value(20), 255);
  EXPECT_EQ(sigmoid_value(-20), 0);
  EXPECT_EQ(sigmoid_value(1'000'000), 255);
  EXPECT_EQ(sigmoid_value(-1'000'000), 0);
}

TEST(Sigmoid, MatchesLongDoubleEvaluation) {
  for (int x = -200; x <= 200; ++x) {
    const long double ref = 255.0L / (1.0L + std::exp(-(long double)x / 2.0L));
    EXPECT_NEAR(double(sigmoid_value(x)), double(std::round(ref)), 0.0) << x;
  }
}

TEST(Sigmoid, MonotoneAndPointSymmetric) {
  for (int x = -40; x < 40; ++x) EXPECT_LE(sigmoid_value(x), sigmoid_value(x + 1));
  for (int x = 1; x <= 40; ++x) EXPECT_EQ(int(sigmoid_value(x)) + int(sigmoid_value(-x)), 255) << x;
}

TEST(Binary, AnyNonzeroSumIsWhite) {
  PolarityGrid g(4, 1, 0, 1);
  g.sums = {0, 1, -1, 7};
  EXPECT_EQ(binary_render(g).values, (std::vector<std::uint8_t>{0, 255, 255, 255}));
  EXPECT_EQ(render(g, Representation::Binary), binary_render(g));
  EXPECT_EQ(render(g, Representation::Sigmoid), sigmoid_render(g));
}

TEST(Debug, OffsetAndClamp) {
  PolarityGrid g(4, 1, 0, 1);
  g.sums = {0, -200, 5, 500};
  EXPECT_EQ(debug_render(g).values, (std::vector<std::uint8_t>{128, 0, 133, 255}));
}

TEST(Pgm, RoundTripAndComments) {
  GrayFrame f(3, 2);
  f.values = {0, 1, 2, 253, 254, 255};
  const auto bytes = encode_pgm(f);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 2), "P5");
  EXPECT_EQ(decode_pgm(bytes), f);

  std::string with_comment = "P5\n# made by hand\n3 2\n255\n";
  with_comment.append(reinterpret_cast<const char*>(f.values.data()), f.values.size());
  EXPECT_EQ(decode_pgm(std::vector<std::uint8_t>(with_comment.begin(), with_comment.end())), f);
}

TEST(Pgm, Malformed) {
  auto bad = [](std::string s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
  EXPECT_THROW(decode_pgm(bad("P2\n1 1\n255\n0")), FormatError);
  EXPECT_THROW(decode_pgm(bad("P5\n2 2\n255\n\x01")), Error);
  EXPECT_THROW(decode_pgm(bad("P5\n1 1\n65535\n\x01\x02")), FormatError);
}
