#pragma once

#include <stdexcept>
#include <string>

namespace krv {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: bad configuration, point outside the domain, violated precondition.
class InputError : public Error {
  public:
    using Error::Error;
};

/// A numerical procedure failed on valid input.
class SolverError : public Error {
  public:
    using Error::Error;
};

class InvalidDomain : public InputError {
  public:
    using InputError::InputError;
};

class OutsideDomain : public InputError {
  public:
    using InputError::InputError;
};

class CoincidentPoints : public InputError {
  public:
    using InputError::InputError;
};

class DiagonalSingular : public InputError {
  public:
    using InputError::InputError;
};

class IncompatibleData : public InputError {
  public:
    using InputError::InputError;
};

class ConvexityViolated : public InputError {
  public:
    using InputError::InputError;
};

class InvalidCirculation : public InputError {
  public:
    using InputError::InputError;
};

class InvalidArgument : public InputError {
  public:
    using InputError::InputError;
};

class SolverFailure : public SolverError {
  public:
    using SolverError::SolverError;
};

class NoConvergence : public SolverError {
  public:
    using SolverError::SolverError;
};

class ConstraintInfeasible : public SolverError {
  public:
    using SolverError::SolverError;
};

class ZeroMass : public SolverError {
  public:
    using SolverError::SolverError;
};

class StepUnderflow : public SolverError {
  public:
    using SolverError::SolverError;
};

} // namespace krv
