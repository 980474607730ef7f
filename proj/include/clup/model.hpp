#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace clup {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One realization of y = A x_sol + sigma v with x_sol = (1/sqrt(n), ..., 1/sqrt(n)).
struct ProblemInstance {
  int n = 0;
  int m = 0;
  double alpha = 0.0;
  double sigma = 0.0;
  Matrix A;
  Vector v;
  Vector x_sol;
  Vector y;

  /// Half-width of the hypercube, 1/sqrt(n).
  double box_bound() const { return 1.0 / std::sqrt(static_cast<double>(n)); }
};

/// sigma such that 1/sigma^2 expressed in dB equals `snr_db`.
double snr_db_to_sigma(double snr_db);

/// m = round(alpha * n), clamped to at least one row.
int rows_for(int n, double alpha);

/// Draws A and v from counter-based Gaussian streams keyed by `seed`:
/// entry (i, j) of A (column-major index i + j*m) and entry i of v are each a
/// pure function of (seed, index).
ProblemInstance generate_instance(int n, double alpha, double sigma, std::uint64_t seed);

}  // namespace clup
