#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "evdet/errors.hpp"

namespace evdet {

/// Default sensor geometry (DAVIS346).
inline constexpr std::uint16_t kDefaultWidth = 346;
inline constexpr std::uint16_t kDefaultHeight = 260;

/// One sensor spike. `t` is in microseconds.
struct Event {
  std::uint64_t t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Events of one sensor, timestamps non-decreasing. Equal timestamps keep the
/// order they were encountered in.
struct EventStream {
  std::uint16_t width = kDefaultWidth;
  std::uint16_t height = kDefaultHeight;
  std::vector<Event> events;

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind { Geometry, Bounds, Polarity, Ordering };

struct Violation {
  ViolationKind kind;
  std::size_t index;  ///< record index; 0 for Geometry
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }

  std::optional<std::size_t> first(ViolationKind kind) const {
    for (const auto& v : violations)
      if (v.kind == kind) return v.index;
    return std::nullopt;
  }
};

inline ValidationReport validate_stream(const EventStream& stream) {
  ValidationReport report;
  if (stream.width == 0 || stream.height == 0)
    report.violations.push_back({ViolationKind::Geometry, 0});
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.x >= stream.width || e.y >= stream.height)
      report.violations.push_back({ViolationKind::Bounds, i});
    if (e.polarity != 1 && e.polarity != -1)
      report.violations.push_back({ViolationKind::Polarity, i});
    if (i > 0 && e.t < stream.events[i - 1].t)
      report.violations.push_back({ViolationKind::Ordering, i});
  }
  return report;
}

namespace detail {

// Incremental per-record check shared by every decoder.
class RecordChecker {
 public:
  RecordChecker(std::uint16_t width, std::uint16_t height) : width_(width), height_(height) {
    if (width == 0 || height == 0) throw ValidationError("sensor width and height must be >= 1");
  }

  void check(const Event& e, std::size_t index) {
    if (e.polarity != 1 && e.polarity != -1)
      throw ValidationError("polarity " + std::to_string(int(e.polarity)) + " not in {+1,-1}",
                            index);
    if (e.x >= width_ || e.y >= height_)
      throw ValidationError("coordinate (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                                ") outside " + std::to_string(width_) + "x" +
                                std::to_string(height_) + " sensor",
                            index);
    if (index > 0 && e.t < last_t_)
      throw OrderingError(index, "timestamp " + std::to_string(e.t) + " precedes " +
                                     std::to_string(last_t_));
    last_t_ = e.t;
  }

 private:
  std::uint16_t width_;
  std::uint16_t height_;
  std::uint64_t last_t_ = 0;
};

template <typename T>
T load_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T(p[i]) << (8 * i));
  return v;
}

template <typename T>
void store_le(std::uint8_t* p, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// EVT1 binary codec
//
// Little-endian. 12-byte header: "EVT1", u16 width, u16 height, u32 reserved (0).
// 16-byte records: u64 t_us, u16 x, u16 y, i8 polarity, 3 zero pad bytes.

namespace evt1 {
inline constexpr std::array<std::uint8_t, 4> kMagic = {'E', 'V', 'T', '1'};
inline constexpr std::size_t kHeaderSize = 12;
inline constexpr std::size_t kRecordSize = 16;

struct Header {
  std::uint16_t width;
  std::uint16_t height;
};

/// Decodes and checks the 12-byte header.
inline Header decode_header(std::span<const std::uint8_t> bytes) {
  const std::size_t magic_len = std::min(bytes.size(), kMagic.size());
  if (!std::equal(bytes.begin(), bytes.begin() + magic_len, kMagic.begin()) || bytes.empty())
    throw FormatError("bad magic: expected \"EVT1\"");
  if (bytes.size() < kHeaderSize) throw TruncationError(bytes.size(), "truncated EVT1 header");
  const std::uint8_t* p = bytes.data();
  Header h{detail::load_le<std::uint16_t>(p + 4), detail::load_le<std::uint16_t>(p + 6)};
  if (detail::load_le<std::uint32_t>(p + 8) != 0) throw FormatError("reserved header field not 0");
  if (h.width == 0 || h.height == 0) throw ValidationError("sensor width and height must be >= 1");
  return h;
}

/// Decodes one record; `offset` is only used for error reporting.
inline Event decode_record(const std::uint8_t* p, std::size_t offset) {
  if (p[13] != 0 || p[14] != 0 || p[15] != 0)
    throw FormatError("nonzero pad bytes in record at byte offset " + std::to_string(offset));
  return Event{detail::load_le<std::uint64_t>(p), detail::load_le<std::uint16_t>(p + 8),
               detail::load_le<std::uint16_t>(p + 10), static_cast<std::int8_t>(p[12])};
}

inline void encode_header(std::uint8_t* p, std::uint16_t width, std::uint16_t height) {
  std::copy(kMagic.begin(), kMagic.end(), p);
  detail::store_le<std::uint16_t>(p + 4, width);
  detail::store_le<std::uint16_t>(p + 6, height);
  detail::store_le<std::uint32_t>(p + 8, 0);
}

inline void encode_record(std::uint8_t* p, const Event& e) {
  detail::store_le<std::uint64_t>(p, e.t);
  detail::store_le<std::uint16_t>(p + 8, e.x);
  detail::store_le<std::uint16_t>(p + 10, e.y);
  p[12] = static_cast<std::uint8_t>(e.polarity);
  p[13] = p[14] = p[15] = 0;
}
}  // namespace evt1

inline EventStream parse_events_binary(std::span<const std::uint8_t> bytes) {
  const evt1::Header h = evt1::decode_header(bytes);
  const std::size_t payload = bytes.size() - evt1::kHeaderSize;
  const std::size_t count = payload / evt1::kRecordSize;
  if (payload % evt1::kRecordSize != 0)
    throw TruncationError(evt1::kHeaderSize + count * evt1::kRecordSize, "truncated EVT1 record");

  EventStream stream{h.width, h.height, {}};
  stream.events.reserve(count);
  detail::RecordChecker checker(h.width, h.height);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t offset = evt1::kHeaderSize + i * evt1::kRecordSize;
    const Event e = evt1::decode_record(bytes.data() + offset, offset);
    checker.check(e, i);
    stream.events.push_back(e);
  }
  return stream;
}

inline std::vector<std::uint8_t> write_events_binary(const EventStream& stream) {
  std::vector<std::uint8_t> out(evt1::kHeaderSize + stream.events.size() * evt1::kRecordSize);
  evt1::encode_header(out.data(), stream.width, stream.height);
  std::uint8_t* p = out.data() + evt1::kHeaderSize;
  for (const Event& e : stream.events) {
    evt1::encode_record(p, e);
    p += evt1::kRecordSize;
  }
  return out;
}

/// Single-pass EVT1 decoder over an input stream; memory use does not grow
/// with the number of events.
class EventReader {
 public:
  explicit EventReader(std::istream& in) : in_(in), checker_(1, 1) {
    std::array<std::uint8_t, evt1::kHeaderSize> buf{};
    in_.read(reinterpret_cast<char*>(buf.data()), buf.size());
    const auto got = static_cast<std::size_t>(in_.gcount());
    const evt1::Header h = evt1::decode_header(std::span(buf.data(), got));
    width_ = h.width;
    height_ = h.height;
    checker_ = detail::RecordChecker(width_, height_);
    offset_ = evt1::kHeaderSize;
  }

  std::uint16_t width() const noexcept { return width_; }
  std::uint16_t height() const noexcept { return height_; }
  std::size_t count() const noexcept { return index_; }

  /// Next event, or nullopt at a clean end of input.
  std::optional<Event> next() {
    std::array<std::uint8_t, evt1::kRecordSize> rec{};
    in_.read(reinterpret_cast<char*>(rec.data()), rec.size());
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got == 0) return std::nullopt;
    if (got < rec.size()) throw TruncationError(offset_, "truncated EVT1 record");
    const Event e = evt1::decode_record(rec.data(), offset_);
    checker_.check(e, index_);
    ++index_;
    offset_ += evt1::kRecordSize;
    return e;
  }

 private:
  std::istream& in_;
  std::uint16_t width_ = 0;
  std::uint16_t height_ = 0;
  detail::RecordChecker checker_;
  std::size_t offset_ = 0;
  std::size_t index_ = 0;
};

// ---------------------------------------------------------------------------
// CSV codec: header `t_us,x,y,p`, one integer row per event, p in {1,-1}.

inline constexpr std::string_view kCsvHeader = "t_us,x,y,p";

namespace detail {

template <typename Int>
bool parse_int(std::string_view field, Int& out) {
  if (field.empty()) return false;
  const char* first = field.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

inline std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace detail

inline EventStream parse_events_csv(std::string_view text, std::uint16_t width,
                                    std::uint16_t height) {
  EventStream stream{width, height, {}};
  detail::RecordChecker checker(width, height);
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = detail::chomp(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (!have_header) {
      if (line != kCsvHeader)
        throw FormatError("line 1: expected CSV header \"" + std::string(kCsvHeader) + "\"");
      have_header = true;
      continue;
    }
    if (line.empty()) continue;

    std::array<std::string_view, 4> fields;
    std::size_t n = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (n == fields.size()) throw ParseError(line_no, "expected 4 fields");
        fields[n++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (n != fields.size()) throw ParseError(line_no, "expected 4 fields");

    std::uint64_t t = 0;
    std::int64_t x = 0, y = 0, p = 0;
    if (!detail::parse_int(fields[0], t)) throw ParseError(line_no, "bad timestamp");
    if (!detail::parse_int(fields[1], x) || !detail::parse_int(fields[2], y))
      throw ParseError(line_no, "bad coordinate");
    if (!detail::parse_int(fields[3], p)) throw ParseError(line_no, "bad polarity");

    const std::size_t index = stream.events.size();
    if (p != 1 && p != -1)
      throw ValidationError("line " + std::to_string(line_no) + ": polarity " +
                                std::to_string(p) + " not in {+1,-1}",
                            index);
    if (x < 0 || y < 0 || x >= width || y >= height)
      throw ValidationError("line " + std::to_string(line_no) + ": coordinate out of bounds",
                            index);
    const Event e{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                  static_cast<std::int8_t>(p)};
    checker.check(e, index);
    stream.events.push_back(e);
  }
  if (!have_header) throw FormatError("missing CSV header");
  return stream;
}

inline std::string write_events_csv(const EventStream& stream) {
  std::string out;
  out.reserve(16 + stream.events.size() * 24);
  out.append(kCsvHeader).push_back('\n');
  std::array<char, 32> buf;
  auto put = [&](auto v, char sep) {
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), ptr);
    out.push_back(sep);
  };
  for (const Event& e : stream.events) {
    put(e.t, ',');
    put(e.x, ',');
    put(e.y, ',');
    put(int(e.polarity), '\n');
  }
  return out;
}

// ---------------------------------------------------------------------------
// File helpers

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline bool is_csv_path(std::string_view path) {
  return path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
}

/// Loads EVT1, or CSV when the path ends in ".csv" (CSV has no header
/// geometry, so width/height are taken from the arguments).
inline EventStream load_events(const std::string& path, std::uint16_t csv_width = kDefaultWidth,
                               std::uint16_t csv_height = kDefaultHeight) {
  const auto bytes = read_file_bytes(path);
  if (is_csv_path(path))
    return parse_events_csv(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), csv_width,
        csv_height);
  return parse_events_binary(bytes);
}

inline void save_events(const std::string& path, const EventStream& stream) {
  if (is_csv_path(path)) {
    const std::string text = write_events_csv(stream);
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  } else {
    write_file_bytes(path, write_events_binary(stream));
  }
}

}  // namespace evdet
