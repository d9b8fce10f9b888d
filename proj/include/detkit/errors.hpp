#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace detkit {

// Base class for all errors raised by the toolkit. Anything thrown out of a
// detkit:: entry point derives from this.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid domain values (score out of range, negative box extent, ...).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Malformed input text. Carries the byte offset (JSON inputs) or the
// 1-based line number (line-oriented inputs) when known; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t byte_offset = 0,
             std::size_t line = 0)
      : Error(msg), byte_offset(byte_offset), line(line) {}

  std::size_t byte_offset;
  std::size_t line;
};

// A cross-reference that does not resolve (unknown image id, category id).
class ReferenceError : public Error {
 public:
  explicit ReferenceError(const std::string& msg) : Error(msg) {}
};

// A caller broke an API precondition (mixed image ids in a single-image
// operation, mismatched list lengths, ...).
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& msg) : Error(msg) {}
};

}  // namespace detkit
