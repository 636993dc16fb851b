#pragma once

#include <stdexcept>
#include <string>

namespace rmtlab {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Dense path requested above the configured dimension cap.
class CapacityError : public DomainError {
 public:
  using DomainError::DomainError;
};

// An iterative numerical kernel did not converge, or a solver invariant that
// should be unreachable was violated.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rmtlab
