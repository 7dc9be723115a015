#pragma once

#include <stdexcept>
#include <string>

namespace qwot {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative kernel hit its iteration cap or lost a bracket.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of the operation (non-finite f(x), bad rank, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Result would exceed the configured dimension guard.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Incompatible matrix shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidCoupling : public Error {
 public:
  using Error::Error;
};

class InvalidChannel : public Error {
 public:
  using Error::Error;
};

class InvalidProblem : public Error {
 public:
  using Error::Error;
};

// Requested construction is defined only for a narrower structure
// (e.g. commuting collections).
class UnsupportedStructure : public Error {
 public:
  using Error::Error;
};

}  // namespace qwot
