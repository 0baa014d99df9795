#pragma once

#include <stdexcept>
#include <string>

namespace ocda {

// Failure categories. The CLI maps each to a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Shape mismatches are programming or configuration errors in the model
// definition; they are reported as numeric failures.
class ShapeError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace ocda
