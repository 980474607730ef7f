#pragma once

// Reference solvers that share no code path with the production kernels.
// They are exponential or brute-force and meant for tiny instances only.

#include <cstdint>
#include <string>
#include <vector>

#include "clup/convex_kernels.hpp"

namespace clup::oracle {

/// Exact min over the box of |y - A x| by enumerating all 3^n face patterns
/// (each coordinate at its lower bound, upper bound, or free); free
/// coordinates solve an unconstrained least-squares problem. n <= 12.
struct BoxLsOracle {
  Vector x;
  double residual_norm;
};
BoxLsOracle box_ls_enumerate(const Matrix& A, const Vector& y);

/// Optimal value of min -c^T x s.t. |y - A x| <= r, x in box, as the
/// maximum of the Lagrange dual g(lambda) = min_box -c^T x + lambda(|y-Ax|^2 - r^2),
/// found by golden-section over log(lambda) in [1e-12, 1e6] (plus lambda = 0).
/// Inner minimizations use plain projected gradient.
struct ClupStepOracle {
  double objective;
  double lambda;
};
ClupStepOracle clup_step_dual_scan(const Matrix& A, const Vector& y, const Vector& c, double r);

/// Adaptive Gauss-Kronrod quadrature of the Gaussian expectations behind
/// theory::integrals_i, integrating the clipped-optimizer value
/// h z + gamma z^2, z = clip(-h/(2 gamma), 0, 2), over h in [-40, 0]
/// (the integrand vanishes for h >= 0).
struct QuadratureIntegrals {
  double i11;
  double i21;
};
QuadratureIntegrals integrals_quadrature(double gamma);

/// Seeded small instance for the solver-vs-oracle suite (n <= 6, m <= 5).
struct SmallCase {
  Matrix A;
  Vector y;
  Vector c;
  double r = 0.0;
};
SmallCase small_case(std::uint64_t seed);

struct OracleCheckReport {
  int cases = 0;
  int box_failures = 0;
  int clup_failures = 0;
  double worst_box_gap = 0.0;
  double worst_clup_gap = 0.0;
  double worst_kkt = 0.0;
  std::vector<std::string> messages;
  bool passed() const { return box_failures == 0 && clup_failures == 0; }
};

/// Runs solve_box_ls / solve_clup_step against the oracles on `cases`
/// seeded instances; gaps and KKT residuals must stay below `tol`.
OracleCheckReport run_oracle_check(int cases, std::uint64_t seed, double tol = 1e-6);

}  // namespace clup::oracle
