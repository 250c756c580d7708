#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lqt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error hierarchy. The CLI maps InputError to exit code 2 and every other
// Error to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent caller input (dimensions, non-finite entries,
// invalid parameters, bad configuration files).
class InputError : public Error {
 public:
  using Error::Error;
};

// The stationary KKT system has no unique solution.
class UniquenessError : public InputError {
 public:
  UniquenessError(const std::string& what, int rank, int dimension)
      : InputError(what), rank_(rank), dimension_(dimension) {}
  int rank() const { return rank_; }
  int dimension() const { return dimension_; }

 private:
  int rank_;
  int dimension_;
};

// (A, B) admits no stabilizing Riccati solution.
class NotStabilizableError : public InputError {
 public:
  using InputError::InputError;
};

// The requested truncation horizon is too short for the closed-loop decay.
class TruncationError : public InputError {
 public:
  using InputError::InputError;
};

// An iterative solver did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Time integration blew up.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lqt
