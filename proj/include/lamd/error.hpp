#pragma once

#include <stdexcept>
#include <string>

namespace lamd {

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced, divergence, or an optimizer that cannot proceed.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed input files, I/O failures, invalid datasets.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid user-supplied configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lamd
