#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ivprobe {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violated a documented precondition (shape, finiteness, range).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Fewer than two distinct classes were present where a classifier is trained.
class DegenerateLabels : public Error {
 public:
  using Error::Error;
};

/// A trained probe has no nonzero weight row.
class DegenerateProbe : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file could not be decoded. `offset()` is the byte (binary formats) or
/// line number (text formats) at which decoding failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace ivprobe
