// Error kinds raised by the library. Every failure path throws mphs::Error
// carrying one of these kinds so callers (notably the CLI) can map them to
// exit codes without parsing messages.
#pragma once

#include <stdexcept>
#include <string>

namespace mphs {

enum class ErrorKind {
  InvalidArgument,
  BudgetExceeded,
  AlphabetMismatch,
  EmptyAccessibleSet,
  ZeroProbability,
  TargetOutOfRange,
  SingularCovariance,
  NoConvergence,
  UndefinedTemperature,
  DimensionMismatch,
  MissingIntensive,
  EntropyOutOfRange,
  BranchAmbiguity,
  NotSkewSymmetric,
  NonpositiveTemperature,
  PassivityViolation,
  AlgebraicLoop,
  StateOutOfDomain,
  ScenarioError,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mphs
