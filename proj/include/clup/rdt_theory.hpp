#pragma once

namespace clup::theory {

/// Closed-form Gaussian expectations of the per-coordinate clipped optimizer
/// z = clip(-h / (2 gamma), 0, 2), h ~ N(0, 1):
///   i11 = E[h z + gamma z^2 ; -4 gamma < h < 0]   (unsaturated part)
///   i21 = E[h z + gamma z^2 ; h <= -4 gamma]      (saturated at z = 2)
struct Integrals {
  double i11;
  double i21;
};

Integrals integrals_i(double gamma);

/// Saddle objective of the first iteration:
///   sqrt(alpha) sqrt(c1z + sigma^2) + i11(gamma) + i21(gamma) - gamma c1z
double xi_rd1(double alpha, double sigma, double c1z, double gamma);

/// argmax over gamma of xi_rd1 at fixed c1z, with the value attained.
struct InnerMax {
  double gamma;
  double value;
};
InnerMax maximize_over_gamma(double alpha, double sigma, double c1z);

struct TheoryFirstIter {
  double alpha = 0.0;
  double sigma = 0.0;
  double gamma_hat = 0.0;
  double c1z_hat = 0.0;
  double xi = 0.0;
  double nu_hat = 0.0;  // kept for parity with later iterations; always 0
  double s1_hat = 0.0;  // likewise always 0
  double p_err1 = 0.0;
  double e_z = 0.0;    // sqrt(n) E z_i
  double e_zsq = 0.0;  // n E z_i^2
  double d1_pred = 0.0;
  double d2_pred = 0.0;
};

/// min over c1z in [0, 4] of max over gamma of xi_rd1, followed by the
/// first-iteration statistics at the saddle.
TheoryFirstIter solve_first_iteration(double alpha, double sigma);

/// Statistics at a given gamma (exposed for consistency checks).
struct FirstIterStats {
  double s_x1, s_xsq1, s_x2, s_xsq2;
  double e_z, e_zsq, d1, d2, p_err;
};
FirstIterStats first_iteration_stats(double gamma);

}  // namespace clup::theory
