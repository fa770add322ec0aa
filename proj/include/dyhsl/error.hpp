#pragma once

#include <stdexcept>
#include <string>

namespace dyhsl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf appeared in a value or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid model / run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file or inconsistent metadata.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input whose contents are unusable (non-finite, degenerate).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Broken internal invariant; indicates a library bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dyhsl
