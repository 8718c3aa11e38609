#pragma once

#include <stdexcept>
#include <string>

namespace peekstat {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A tail integral (mean, superquantile, potential) diverges.
class NonintegrableTail : public Error {
 public:
  using Error::Error;
};

// Conditioning on an event of probability zero.
class EmptyConditioning : public Error {
 public:
  using Error::Error;
};

// Path values that cannot come from a nonnegative process started at 1.
class InvalidPath : public Error {
 public:
  using Error::Error;
};

class DegeneratePotential : public Error {
 public:
  using Error::Error;
};

class InitialConditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace peekstat
