#ifndef TRANSMIX_ERRORS_HPP
#define TRANSMIX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace transmix {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter violates its domain (negative mass, zero-sum Q, bad length).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Too few observations for the requested statistic.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (quadrature mismatch, infeasible compact set,
/// unparsable config file).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Optimizer could not produce a usable minimizer.
class OptimizationFailure : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed, or input data is malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace transmix

#endif  // TRANSMIX_ERRORS_HPP
