#pragma once

#include <stdexcept>
#include <string>

namespace stresskit {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad WAV header, bad container magic, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Recognized format but unsupported variant (e.g. 24-bit PCM).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure (missing file, unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor / matrix dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Numeric argument outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input too short for the requested analysis.
class InsufficientInputError : public Error {
 public:
  using Error::Error;
};

/// Dataset-level problems: empty splits, count mismatches, label issues.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Manifest / config text that fails to parse; message names the line.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace stresskit
