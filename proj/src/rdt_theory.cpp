#include "clup/rdt_theory.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "clup/error.hpp"

namespace clup::theory {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
const double kSqrt2Pi = std::sqrt(2.0 * std::numbers::pi);

constexpr double kGammaFloor = 1e-8;
constexpr double kGammaCap = 64.0;
constexpr double kGammaCeiling = 1e12;
constexpr double kArgTol = 1e-10;
constexpr double kCFloor = 1e-24;  // gamma_hat ~ 1/sqrt(8c) stays below kGammaCeiling
constexpr double kInvPhi = 0.6180339887498949;  // (sqrt(5) - 1) / 2

double gaussian_pdf(double h) { return std::exp(-0.5 * h * h) / kSqrt2Pi; }

// Golden-section search for the maximum of a unimodal f on [a, b].
template <class F>
double golden_max(F&& f, double a, double b, double tol) {
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

}  // namespace

Integrals integrals_i(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error("integrals_i: gamma must be positive");
  const double a = 4.0 * gamma;
  // E[-h^2/(4 gamma); -a < h < 0] = -(erf(a/sqrt2)/2 - a phi(a)) / (4 gamma)
  const double i11 = -(0.5 * std::erf(a / kSqrt2) - a * gaussian_pdf(a)) / (4.0 * gamma);
  // E[2h + 4 gamma; h < -a]
  const double i21 = 2.0 * gamma * std::erfc(a / kSqrt2) - 2.0 * gaussian_pdf(a);
  return {i11, i21};
}

double xi_rd1(double alpha, double sigma, double c1z, double gamma) {
  if (!(alpha > 0.0)) throw Error("xi_rd1: alpha must be positive");
  if (!(sigma > 0.0)) throw Error("xi_rd1: sigma must be positive");
  if (!(c1z >= 0.0 && c1z <= 4.0)) throw Error("xi_rd1: c1z outside [0, 4]");
  const auto [i11, i21] = integrals_i(gamma);
  return std::sqrt(alpha) * std::sqrt(c1z + sigma * sigma) + i11 + i21 - gamma * c1z;
}

InnerMax maximize_over_gamma(double alpha, double sigma, double c1z) {
  auto f = [&](double g) { return xi_rd1(alpha, sigma, c1z, g); };

  // Log-spaced scan to bracket the (concave-in-gamma) maximum, widening the
  // upper end while the best sample sits on it.
  double hi = kGammaCap;
  constexpr int kScan = 96;
  while (true) {
    const double lo = kGammaFloor;
    const double ratio = std::pow(hi / lo, 1.0 / (kScan - 1));
    int best = 0;
    double best_val = -INFINITY;
    double g = lo;
    for (int i = 0; i < kScan; ++i, g *= ratio) {
      const double v = f(g);
      if (v > best_val) {
        best_val = v;
        best = i;
      }
    }
    if (best == kScan - 1) {
      if (hi >= kGammaCeiling) {
        std::ostringstream msg;
        msg << "no interior maximizer in gamma up to " << hi << " (alpha=" << alpha << ", sigma=" << sigma
            << ", c1z=" << c1z << ")";
        throw Error(msg.str());
      }
      hi *= 64.0;
      continue;
    }
    const double a = best == 0 ? lo * 0.5 : lo * std::pow(ratio, best - 1);
    const double b = lo * std::pow(ratio, best + 1);
    const double tol = std::max(kArgTol, 1e-14 * b);
    const double arg = golden_max(f, a, b, tol);
    return {arg, f(arg)};
  }
}

FirstIterStats first_iteration_stats(double gamma) {
  const auto [i11, i21] = integrals_i(gamma);
  (void)i21;
  FirstIterStats s{};
  const double a = 4.0 * gamma;
  s.s_x1 = (1.0 - std::exp(-0.5 * a * a)) / (2.0 * gamma * kSqrt2Pi);
  s.s_xsq1 = -i11 / gamma;
  s.s_x2 = std::erfc(a / kSqrt2);
  s.s_xsq2 = 2.0 * s.s_x2;
  s.e_z = s.s_x1 + s.s_x2;
  s.e_zsq = s.s_xsq1 + s.s_xsq2;
  s.d1 = 1.0 - s.e_z;
  s.d2 = s.e_zsq + 2.0 * s.d1 - 1.0;
  // 1 - erfc(-sqrt2 gamma)/2, evaluated without cancellation.
  s.p_err = 0.5 * std::erfc(kSqrt2 * gamma);
  return s;
}

TheoryFirstIter solve_first_iteration(double alpha, double sigma) {
  if (!(alpha > 0.0)) throw Error("solve_first_iteration: alpha must be positive");
  if (!(sigma > 0.0)) throw Error("solve_first_iteration: sigma must be positive");

  // The minimizer shrinks like sigma^2 as sigma -> 0, below any fixed absolute
  // tolerance, so search over log c. A log step of kArgTol / 4 keeps the
  // absolute error under kArgTol on all of [0, 4].
  auto outer = [&](double log_c) { return -maximize_over_gamma(alpha, sigma, std::exp(log_c)).value; };
  const double c_hat = std::min(4.0, std::exp(golden_max(outer, std::log(kCFloor), std::log(4.0), 0.25 * kArgTol)));
  const InnerMax inner = maximize_over_gamma(alpha, sigma, c_hat);

  TheoryFirstIter t;
  t.alpha = alpha;
  t.sigma = sigma;
  t.gamma_hat = inner.gamma;
  t.c1z_hat = c_hat;
  t.xi = inner.value;
  const auto s = first_iteration_stats(inner.gamma);
  t.p_err1 = s.p_err;
  t.e_z = s.e_z;
  t.e_zsq = s.e_zsq;
  t.d1_pred = s.d1;
  t.d2_pred = s.d2;
  return t;
}

}  // namespace clup::theory

