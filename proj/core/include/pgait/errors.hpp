#pragma once

#include <stdexcept>
#include <string>

namespace pgait {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or sizes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition (bad label, zero size, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Configuration values that break a type invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or stream failure. The message names the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

class CodecError : public Error {
 public:
  using Error::Error;
};

enum class DecodeErrc {
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kMalformed,
  kCrcMismatch,
};

const char* to_string(DecodeErrc code) noexcept;

class DecodeError : public CodecError {
 public:
  DecodeError(DecodeErrc code, const std::string& what)
      : CodecError(std::string(to_string(code)) + ": " + what), code_(code) {}

  DecodeErrc code() const noexcept { return code_; }

 private:
  DecodeErrc code_;
};

/// Training produced a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace pgait
