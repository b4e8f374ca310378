#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cytobench {

// Base for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (JSON, config, CSV). Carries the zero-based byte offset
// of the offending character when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), offset_(byte_offset) {}
  explicit ParseError(const std::string& what) : Error(what), offset_(0) {}

  std::size_t byte_offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Degenerate or invalid geometry (self-intersection, zero area, too few vertices).
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Too few tissue pixels to estimate a stain matrix.
class NoTissueError : public Error {
 public:
  using Error::Error;
};

// Violated operation precondition (mismatched sizes, empty samples, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace cytobench
