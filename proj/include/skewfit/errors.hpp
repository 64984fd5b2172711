#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace skewfit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all numerical failures raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative procedure hit its iteration cap. Carries the last iterate.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, Vector last_iterate,
                      Matrix last_covariance = Matrix())
      : Error(what),
        last_iterate_(std::move(last_iterate)),
        last_covariance_(std::move(last_covariance)) {}
  const Vector& last_iterate() const { return last_iterate_; }
  // Empty unless the failing routine maintains a Gaussian state (EP).
  const Matrix& last_covariance() const { return last_covariance_; }

 private:
  Vector last_iterate_;
  Matrix last_covariance_;
};

class IndefiniteCurvatureError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class StepSizeError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Quadrature domain does not hold the mass of a density.
class DomainTooSmallError : public Error {
 public:
  DomainTooSmallError(const std::string& what, double deficit)
      : Error(what), deficit_(deficit) {}
  double deficit() const { return deficit_; }

 private:
  double deficit_;
};

class SupportMismatchError : public Error {
 public:
  using Error::Error;
};

class UnreliableEstimateError : public Error {
 public:
  using Error::Error;
};

class StuckChainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace skewfit
