#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace brl {

// Invalid input or configuration; maps to exit status 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidDomain : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DiskRejected : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Numerical failure; maps to exit status 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateChord : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SymmetryViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IllConditionedFit : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DifferentiationUnstable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoInvariantCurve : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonConjugacy : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TruncationUnstable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficient : public NumericalError {
 public:
  RankDeficient(const std::string& what, std::vector<double> kernel)
      : NumericalError(what), kernel_vector(std::move(kernel)) {}
  std::vector<double> kernel_vector;
};

class SelectionExhausted : public NumericalError {
 public:
  SelectionExhausted(const std::string& what, int residual_dim)
      : NumericalError(what), residual_kernel_dim(residual_dim) {}
  int residual_kernel_dim;
};

}  // namespace brl
