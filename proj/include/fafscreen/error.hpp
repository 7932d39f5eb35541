#pragma once

#include <stdexcept>
#include <string>

namespace faf {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error line and the HTTP API.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "Error"; }
};

/// Malformed input data: bad file contents, schema violations, broken
/// invariants in caller-supplied values.
class DataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "DataError"; }
};

class ImageFormatError : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "ImageFormatError"; }
};

/// Caller passed arguments that violate a precondition.
class InvalidArgument : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "InvalidArgument"; }
};

}  // namespace faf
