#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace varcert {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data is malformed (bad shapes, unparsable text, bad flags).
class InputError : public Error {
 public:
  using Error::Error;
};

class SyntaxError : public InputError {
 public:
  SyntaxError(std::size_t position, const std::string& message)
      : InputError("syntax error at " + std::to_string(position) + ": " +
                   message),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class UnknownVariable : public InputError {
 public:
  explicit UnknownVariable(const std::string& name)
      : InputError("unknown variable '" + name + "'"), name_(name) {}

  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class DimensionMismatch : public InputError {
 public:
  using InputError::InputError;
};

/// A point that must lie in a set does not.
class NotMember : public Error {
 public:
  using Error::Error;
};

/// The point is outside dom φ.
class NotInDomain : public Error {
 public:
  using Error::Error;
};

class InfeasiblePoint : public Error {
 public:
  using Error::Error;
};

class EmptySet : public Error {
 public:
  using Error::Error;
};

/// An operation requires convexity (or regularity) that could not be
/// established.
class NonconvexUnsupported : public Error {
 public:
  using Error::Error;
};

/// The stationarity system has no solution: the point is not dual-stationary.
class NoMultiplier : public Error {
 public:
  using Error::Error;
};

/// A vector claimed to lie in a cone has no generator decomposition.
class InfeasibleWitness : public Error {
 public:
  using Error::Error;
};

class DimensionTooLarge : public Error {
 public:
  using Error::Error;
};

class NotUnit : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: the caller's data is fine but an algorithm broke down.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NumericalBreakdown : public NumericalError {
 public:
  explicit NumericalBreakdown(double pivot)
      : NumericalError("numerical breakdown: pivot magnitude " +
                       std::to_string(pivot)),
        pivot_(pivot) {}

  double pivot() const { return pivot_; }

 private:
  double pivot_;
};

class NonConvergence : public NumericalError {
 public:
  explicit NonConvergence(int iterations)
      : NumericalError("no convergence after " + std::to_string(iterations) +
                       " iterations"),
        iterations_(iterations) {}

  int iterations() const { return iterations_; }

 private:
  int iterations_;
};

}  // namespace varcert
