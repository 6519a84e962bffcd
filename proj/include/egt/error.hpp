#pragma once

#include <stdexcept>
#include <string>

namespace egt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: malformed distributions, mismatched grids, bad parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN, failed to converge, or underflowed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A checked mathematical property did not hold on the computed result.
class PropertyViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace egt
