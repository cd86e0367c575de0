#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evdet {

/// Base of every structured error raised by the library. Anything else
/// escaping a parser is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input does not follow the expected container layout (bad magic, nonzero
/// reserved bytes, wrong header line).
class FormatError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public Error {
 public:
  TruncationError(std::size_t offset, const std::string& what)
      : Error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A decoded value violates a domain invariant. `index()` is the record index
/// when the violation is tied to one record.
class ValidationError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit ValidationError(const std::string& what, std::size_t index = npos)
      : Error(index == npos ? what : what + " (record " + std::to_string(index) + ")"),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class OrderingError : public Error {
 public:
  OrderingError(std::size_t index, const std::string& what)
      : Error(what + " (record " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Text input could not be tokenized. Lines are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Caller-supplied arguments violate an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (e.g. AP with no ground truth).
/// Distinct from a metric that evaluates to zero.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace evdet
