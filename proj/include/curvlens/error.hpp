#pragma once

#include <stdexcept>
#include <string>

namespace curvlens {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf appeared in a computation that must stay finite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An iterative routine failed to converge within its cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or unsupported schema.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace curvlens
