#pragma once

#include <stdexcept>
#include <string>

namespace pertl {

/// Raised when a computation produces non-finite values, diverges, or hits a
/// singular system. The CLI maps it to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Normal matrix is singular or numerically rank deficient beyond repair.
class SingularMatrixError : public NumericalError {
 public:
  SingularMatrixError(const std::string& what, double condition_estimate)
      : NumericalError(what), condition_estimate_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

}  // namespace pertl
