#pragma once

#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evdet/errors.hpp"
#include "evdet/event_model.hpp"
#include "evdet/frame_synthesis.hpp"

namespace evdet {

/// Binary PGM (P5), maxval 255.
inline std::vector<std::uint8_t> encode_pgm(const GrayFrame& frame) {
  const std::string header =
      "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), frame.values.begin(), frame.values.end());
  return out;
}

/// Decodes P5 with maxval <= 255. Comments in the header are skipped.
inline GrayFrame decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw FormatError(std::string("PGM: missing ") + what);
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 65535) throw FormatError(std::string("PGM: ") + what + " too large");
    }
    return static_cast<std::uint32_t>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw FormatError("PGM: expected P5 magic");
  pos = 2;
  const auto w = read_uint("width");
  const auto h = read_uint("height");
  const auto maxval = read_uint("maxval");
  if (w == 0 || h == 0) throw FormatError("PGM: zero dimension");
  if (maxval == 0 || maxval > 255) throw FormatError("PGM: only 8-bit maxval supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("PGM: bad header");
  ++pos;

  GrayFrame frame(static_cast<std::uint16_t>(w), static_cast<std::uint16_t>(h));
  if (bytes.size() - pos < frame.values.size())
    throw TruncationError(bytes.size(), "PGM: truncated pixel data");
  std::copy_n(bytes.begin() + std::ptrdiff_t(pos), frame.values.size(), frame.values.begin());
  return frame;
}

inline void write_pgm(const std::string& path, const GrayFrame& frame) {
  write_file_bytes(path, encode_pgm(frame));
}

inline GrayFrame read_pgm(const std::string& path) { return decode_pgm(read_file_bytes(path)); }

}  // namespace evdet
