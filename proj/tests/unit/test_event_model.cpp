#include <gtest/gtest.h>

#include <sstream>

#include "evdet/event_model.hpp"
#include "oracles.hpp"

using namespace evdet;

namespace {

std::vector<std::uint8_t> bytes_of(const EventStream& s) { return write_events_binary(s); }

EventStream three_events() {
  return {4, 3, {{10, 0, 0, 1}, {10, 3, 2, -1}, {25, 1, 1, 1}}};
}

}  // namespace

TEST(Evt1, HeaderAndRecordLayout) {
  const auto b = bytes_of({346, 260, {{0x0102030405060708ULL, 0x0a0b, 0x0c0d, -1}}});
  ASSERT_EQ(b.size(), 12u + 16u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "EVT1");
  EXPECT_EQ(b[4] | b[5] << 8, 346);
  EXPECT_EQ(b[6] | b[7] << 8, 260);
  for (int i = 8; i < 12; ++i) EXPECT_EQ(b[i], 0);
  EXPECT_EQ(b[12], 0x08);  // little-endian timestamp
  EXPECT_EQ(b[19], 0x01);
  EXPECT_EQ(b[20], 0x0b);
  EXPECT_EQ(b[22], 0x0d);
  EXPECT_EQ(b[24], 0xff);  // int8 -1
  EXPECT_EQ(b[25] | b[26] | b[27], 0);
}

TEST(Evt1, RoundTrip) {
  const auto s = three_events();
  const auto b = bytes_of(s);
  EXPECT_EQ(parse_events_binary(b), s);
  EXPECT_EQ(bytes_of(parse_events_binary(b)), b);
}

TEST(Evt1, EmptyStreamIsJustAHeader) {
  const EventStream s{346, 260, {}};
  const auto b = bytes_of(s);
  EXPECT_EQ(b.size(), 12u);
  EXPECT_EQ(parse_events_binary(b), s);
}

TEST(Evt1, BadMagic) {
  auto b = bytes_of(three_events());
  b[3] = '2';
  EXPECT_THROW(parse_events_binary(b), FormatError);
}

TEST(Evt1, NonzeroReservedOrPaddingRejected) {
  auto b = bytes_of(three_events());
  b[9] = 1;
  EXPECT_THROW(parse_events_binary(b), FormatError);
  b = bytes_of(three_events());
  b[12 + 16 + 14] = 7;
  EXPECT_THROW(parse_events_binary(b), FormatError);
}

TEST(Evt1, TruncationReportsOffset) {
  auto b = bytes_of(three_events());
  b.resize(b.size() - 5);
  try {
    parse_events_binary(b);
    FAIL();
  } catch (const TruncationError& e) {
    EXPECT_EQ(e.offset(), 12u + 2 * 16u);
  }
  EXPECT_THROW(parse_events_binary(std::vector<std::uint8_t>{'E', 'V', 'T'}), TruncationError);
}

TEST(Evt1, InvalidRecordsRejected) {
  auto bad_polarity = three_events();
  bad_polarity.events[1].polarity = 0;
  try {
    parse_events_binary(bytes_of(bad_polarity));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.index(), 1u);
  }

  auto out_of_bounds = three_events();
  out_of_bounds.events[2].x = 4;
  EXPECT_THROW(parse_events_binary(bytes_of(out_of_bounds)), ValidationError);

  auto unordered = three_events();
  unordered.events[2].t = 9;
  try {
    parse_events_binary(bytes_of(unordered));
    FAIL();
  } catch (const OrderingError& e) {
    EXPECT_EQ(e.index(), 2u);
  }

  EventStream zero{0, 5, {}};
  EXPECT_THROW(parse_events_binary(bytes_of(zero)), Error);
}

TEST(Evt1, StreamingReaderMatchesBulkParse) {
  const auto s = three_events();
  const auto b = bytes_of(s);
  std::istringstream in(std::string(b.begin(), b.end()));
  EventReader reader(in);
  std::vector<Event> got;
  while (auto e = reader.next()) got.push_back(*e);
  EXPECT_EQ(got, s.events);
}

TEST(Validate, ReportsEveryViolationKind) {
  EventStream s{4, 3, {{5, 0, 0, 1}, {4, 9, 0, 1}, {6, 0, 0, 2}}};
  const auto r = validate_stream(s);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.first(ViolationKind::Ordering), 1u);
  EXPECT_EQ(r.first(ViolationKind::Bounds), 1u);
  EXPECT_EQ(r.first(ViolationKind::Polarity), 2u);
  EXPECT_FALSE(r.first(ViolationKind::Geometry).has_value());
  EXPECT_TRUE(validate_stream(three_events()).ok());
}

TEST(Csv, RoundTrip) {
  const auto s = three_events();
  const std::string text = write_events_csv(s);
  EXPECT_EQ(text.substr(0, 11), "t_us,x,y,p\n");
  EXPECT_EQ(parse_events_csv(text, 4, 3), s);
  EXPECT_EQ(write_events_csv(parse_events_csv(text, 4, 3)), text);
}

TEST(Csv, ToleratesCrlfAndBlankLines) {
  const auto s = parse_events_csv("t_us,x,y,p\r\n1,0,0,1\r\n\r\n2,1,1,-1\r\n", 2, 2);
  ASSERT_EQ(s.events.size(), 2u);
  EXPECT_EQ(s.events[1], (Event{2, 1, 1, -1}));
}

TEST(Csv, Errors) {
  EXPECT_THROW(parse_events_csv("t,x,y,p\n1,0,0,1\n", 2, 2), FormatError);
  try {
    parse_events_csv("t_us,x,y,p\n1,0,0,1\n2,zero,0,1\n", 2, 2);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_events_csv("t_us,x,y,p\n1,0,0,1,9\n", 2, 2), ParseError);
  EXPECT_THROW(parse_events_csv("t_us,x,y,p\n1,0,0,0\n", 2, 2), ValidationError);
  EXPECT_THROW(parse_events_csv("t_us,x,y,p\n1,2,0,1\n", 2, 2), ValidationError);
  EXPECT_THROW(parse_events_csv("t_us,x,y,p\n5,0,0,1\n4,0,0,1\n", 2, 2), OrderingError);
  EXPECT_THROW(parse_events_csv("t_us,x,y,p\n-1,0,0,1\n", 2, 2), ParseError);
}

TEST(Codecs, RandomRoundTrips) {
  oracle::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto s = oracle::random_stream(rng, 2000, 300);
    const auto b = write_events_binary(s);
    ASSERT_EQ(parse_events_binary(b), s);
    ASSERT_EQ(parse_events_csv(write_events_csv(s), s.width, s.height), s);
  }
}

TEST(Codecs, FuzzedBinaryYieldsStructuredErrors) {
  oracle::Rng rng(11);
  const auto base = write_events_binary(oracle::random_stream(rng, 50, 64));
  for (int i = 0; i < 3000; ++i) {
    auto b = base;
    const int edits = int(oracle::uniform(rng, 1, 4));
    for (int k = 0; k < edits && !b.empty(); ++k) b[oracle::uniform(rng, 0, b.size() - 1)] = std::uint8_t(rng());
    if (rng() % 3 == 0) b.resize(oracle::uniform(rng, 0, b.size()));
    try {
      parse_events_binary(b);
    } catch (const Error&) {
    }
  }
}

TEST(Files, LoadAndSaveDispatchOnExtension) {
  const auto dir = std::filesystem::temp_directory_path() / "evdet_event_model_test";
  std::filesystem::create_directories(dir);
  const auto s = three_events();
  save_events((dir / "a.evt1").string(), s);
  save_events((dir / "a.csv").string(), s);
  EXPECT_EQ(load_events((dir / "a.evt1").string()), s);
  EXPECT_EQ(load_events((dir / "a.csv").string(), 4, 3), s);
  EXPECT_THROW(load_events((dir / "missing.evt1").string()), IoError);
  std::filesystem::remove_all(dir);
}
