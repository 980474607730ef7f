#pragma once

#include <optional>
#include <vector>

#include "clup/model.hpp"

namespace clup {

struct SolverSettings {
  double grad_tol = 1e-8;      // projected-gradient fixed-point tolerance (relative)
  double radius_tol = 1e-6;    // relative tolerance on the active ball constraint
  int max_inner_iters = 20000;
  int max_bisect_iters = 200;

  /// Throws clup::Error on nonpositive tolerances or caps.
  void validate() const;
};

enum class SolveStatus { Converged, IterLimit };

const char* to_string(SolveStatus s);

/// One evaluation of the Lagrangian subproblem during the dual search.
struct DualProbe {
  double lambda;
  double residual_norm;
};

struct SubproblemResult {
  Vector x;
  double objective = 0.0;
  double residual_norm = 0.0;
  SolveStatus status = SolveStatus::Converged;
  double kkt_residual = 0.0;

  // Diagnostics.
  double lambda = 0.0;           // dual multiplier of the squared-ball constraint; 0 if inactive
  bool corner_shortcut = false;  // ball inactive, x = sign(c)/sqrt(n)
  int inner_iterations = 0;
  std::vector<DualProbe> probes;
};

/// Upper estimate of sigma_max(A)^2 by power iteration on A^T A, inflated by 1%.
double spectral_norm_sq(const Matrix& A);

/// Precomputed data for repeated subproblems on the same (A, y):
/// Gram matrix, A^T y, |y|^2 and the step-size bound.
class LeastSquaresSystem {
 public:
  LeastSquaresSystem(const Matrix& A, const Vector& y);

  const Matrix& A() const { return A_; }
  const Vector& y() const { return y_; }
  const Matrix& gram() const { return gram_; }
  const Vector& aty() const { return aty_; }
  double lipschitz() const { return lipschitz_; }
  double bound() const { return bound_; }
  int cols() const { return static_cast<int>(A_.cols()); }

  double residual_norm(const Vector& x) const { return (y_ - A_ * x).norm(); }

 private:
  const Matrix& A_;
  const Vector& y_;
  Matrix gram_;
  Vector aty_;
  double lipschitz_;
  double bound_;
};

/// min 1/2 |y - A x|^2 over [-1/sqrt(n), 1/sqrt(n)]^n. `objective` holds the
/// un-squared residual |y - A x|.
SubproblemResult solve_box_ls(const Matrix& A, const Vector& y, const SolverSettings& settings);
SubproblemResult solve_box_ls(const LeastSquaresSystem& sys, const SolverSettings& settings,
                              const Vector* warm_start = nullptr);

/// Warm-start information carried between consecutive CLuP steps.
struct ClupStepHint {
  std::optional<Vector> x;
  double lambda = 0.0;  // <= 0 means no hint
};

/// min -c^T x subject to |y - A x| <= r and x in the hypercube.
///
/// The box corner sign(c)/sqrt(n) is returned verbatim when it lies inside the
/// ball. Otherwise the multiplier lambda of the squared-ball constraint is
/// bracketed and bisected; each Lagrangian subproblem
///   min -c^T x + lambda (|y - A x|^2 - r^2)   over the box
/// is a box QP solved by gradient projection with step 1/(2 lambda L).
/// Throws InfeasibleError when r is below the box least-squares residual.
SubproblemResult solve_clup_step(const Matrix& A, const Vector& y, const Vector& c, double r,
                                 const SolverSettings& settings);
SubproblemResult solve_clup_step(const LeastSquaresSystem& sys, const Vector& c, double r,
                                 const SolverSettings& settings,
                                 const ClupStepHint* hint = nullptr);

/// max-norm of x - P(x - g): zero exactly at KKT points of a box-constrained
/// problem with gradient g.
double projected_gradient_norm(const Vector& x, const Vector& g, double bound);

}  // namespace clup
