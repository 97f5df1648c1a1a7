#pragma once

#include <stdexcept>
#include <string>

namespace tsrl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or series dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A forward computation produced (or was handed) a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files: datasets, checkpoints, config.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-facing configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsrl
