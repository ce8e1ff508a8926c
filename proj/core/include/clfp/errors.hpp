#pragma once

#include <stdexcept>
#include <string>

namespace clfp {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor extents.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid ModelConfig / GenConfig / training options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes: PGM, checkpoint, CSV, key=value files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Dataset-level problems: empty splits, labels out of range, degenerate pools.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace clfp
