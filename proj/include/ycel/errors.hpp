#pragma once

#include <stdexcept>
#include <string>

namespace ycel {

/// Invalid physical input: out-of-triangle inversions, nonpositive rates,
/// malformed configuration values.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent run configuration (dimension mismatch, bad step size).
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Internal arithmetic disagreed with an identity that validation should have
/// guaranteed (e.g. a radicand far below zero).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The drift matrix has no decaying steady state, or a transient would overflow.
class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Singular linear system where a unique solution was required.
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fock-space truncation too small for the requested run.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-step integration failed its trace or step-halving checks.
class IntegratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A witness whose gains cannot certify anything (zero gains or zero bound).
class DegenerateWitnessError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace ycel
