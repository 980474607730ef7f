#pragma once

#include <stdexcept>
#include <string>

namespace clup {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the residual ball cannot meet the hypercube.
class InfeasibleError : public Error {
 public:
  InfeasibleError(double radius, double min_residual)
      : Error("infeasible: radius " + std::to_string(radius) +
              " below box least-squares residual " + std::to_string(min_residual)),
        radius_(radius),
        min_residual_(min_residual) {}

  double radius() const noexcept { return radius_; }
  double min_residual() const noexcept { return min_residual_; }

 private:
  double radius_;
  double min_residual_;
};

}  // namespace clup
