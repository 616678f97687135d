#ifndef NSPVI_ERROR_HPP
#define NSPVI_ERROR_HPP

#include <stdexcept>
#include <string>

namespace nspvi {

// Precondition violated by the caller (bad interval, empty sample set, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A floating-point computation produced a value outside its domain.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Weibull density evaluated exactly at its singular point (x = 0, shape < 1).
class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
};

// An event sits where its intensity is exactly zero.
class LogOfZeroError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Thinning observed an intensity above its declared bound.
class DominationError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nspvi

#endif  // NSPVI_ERROR_HPP
