#pragma once

#include <stdexcept>
#include <string>

namespace lininf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A value overflowed the representable range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// An expression could not be evaluated at the requested point.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Graph-level problem: cycles, unknown ids, missing parents.
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Linear algebra failure (ill-conditioned or singular evidence block).
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}

  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// Malformed model document.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace lininf
