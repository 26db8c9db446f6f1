#pragma once

#include <stdexcept>
#include <string>

namespace blindlab {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape or kernel geometry does not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A class label or other index lies outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset or model file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value, missing key, or impossible request.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Statistic requested over an empty input.
class UndefinedInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace blindlab
