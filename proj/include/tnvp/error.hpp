#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tnvp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value failed validation (bad config, bad argument, empty data).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// NaN, Inf or exp overflow escaped an operation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File-level failure. `kind` distinguishes the checkpoint failure modes.
class IoError : public Error {
 public:
  enum class Kind { Open, Malformed, BadMagic, UnsupportedVersion, Truncated, NoPairs };

  IoError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace tnvp
