#pragma once

#include <stdexcept>
#include <string>

namespace rectnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing, unreadable or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad header, size mismatch, bad magic).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Tensor or container dimensions that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value outside the domain an operation accepts.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace rectnet
