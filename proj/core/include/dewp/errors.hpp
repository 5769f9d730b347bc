#pragma once

#include <stdexcept>
#include <string>

namespace dewp {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shape or length mismatch.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration (rejected before compute starts).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data, unreadable files, corrupt or incompatible artifacts.
class DataError : public Error {
 public:
  using Error::Error;
};

/// API misuse: a precondition the caller was required to uphold was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during training or inference.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace dewp
