#pragma once

#include <stdexcept>
#include <string>

namespace perslab {

// Argument outside the documented domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A series or iteration did not reach its tolerance.
class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Neither circulant embedding nor jittered Cholesky produced a factorization.
class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridTooLargeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A t-grid handed to the Lamperti map does not span the requested window.
class CoverageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Survivor counts too small to support an exponent fit at the given budget.
class BudgetInfeasibleError : public InsufficientDataError {
 public:
  using InsufficientDataError::InsufficientDataError;
};

}  // namespace perslab
