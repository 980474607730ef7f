#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "clup/error.hpp"
#include "clup/rng.hpp"

namespace clup::oracle {

BoxLsOracle box_ls_enumerate(const Matrix& A, const Vector& y) {
  const auto n = A.cols();
  if (n > 12) throw Error("box_ls_enumerate: n too large");
  const double u = 1.0 / std::sqrt(static_cast<double>(n));

  long patterns = 1;
  for (Eigen::Index i = 0; i < n; ++i) patterns *= 3;

  BoxLsOracle best{Vector::Zero(n), std::numeric_limits<double>::infinity()};
  std::vector<int> state(static_cast<size_t>(n));
  for (long p = 0; p < patterns; ++p) {
    long code = p;
    std::vector<Eigen::Index> free;
    Vector x = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int s = static_cast<int>(code % 3);
      code /= 3;
      if (s == 0) x[i] = -u;
      else if (s == 1) x[i] = u;
      else free.push_back(i);
    }
    if (!free.empty()) {
      const Matrix af = A(Eigen::all, free);
      const Eigen::ColPivHouseholderQR<Matrix> qr(af);
      if (qr.rank() < static_cast<Eigen::Index>(free.size())) continue;
      const Vector rhs = y - A * x;
      const Vector xf = qr.solve(rhs);
      bool feasible = true;
      for (size_t k = 0; k < free.size(); ++k) {
        const double v = xf[static_cast<Eigen::Index>(k)];
        if (v < -u - 1e-12 || v > u + 1e-12) feasible = false;
        x[free[k]] = std::clamp(v, -u, u);
      }
      if (!feasible) continue;
    }
    const double res = (y - A * x).norm();
    if (res < best.residual_norm) best = {x, res};
  }
  return best;
}

namespace {

// Plain projected gradient for min -c^T x + lambda |y - A x|^2 over the box.
double lagrangian_min(const Matrix& A, const Vector& y, const Vector& c, double lambda, double a_norm_sq,
                      double u, Vector& x) {
  if (lambda == 0.0) {
    for (Eigen::Index i = 0; i < c.size(); ++i) x[i] = c[i] < 0.0 ? -u : u;
    return -c.dot(x);
  }
  const double step = 1.0 / (2.0 * lambda * a_norm_sq);
  for (int it = 0; it < 1000000; ++it) {
    const Vector g = -c - 2.0 * lambda * A.transpose() * (y - A * x);
    const Vector next = (x - step * g).cwiseMax(-u).cwiseMin(u);
    const double move = (next - x).lpNorm<Eigen::Infinity>();
    x = next;
    if (move < 1e-15) break;
  }
  return -c.dot(x) + lambda * (y - A * x).squaredNorm();
}

}  // namespace

ClupStepOracle clup_step_dual_scan(const Matrix& A, const Vector& y, const Vector& c, double r) {
  const auto n = A.cols();
  const double u = 1.0 / std::sqrt(static_cast<double>(n));
  const Eigen::JacobiSVD<Matrix> svd(A);
  const double a_norm_sq = std::pow(svd.singularValues()[0], 2);

  Vector x = Vector::Zero(n);
  auto dual = [&](double lambda) {
    return lagrangian_min(A, y, c, lambda, a_norm_sq, u, x) - lambda * r * r;
  };

  ClupStepOracle best{dual(0.0), 0.0};
  constexpr double kInvPhi = 0.6180339887498949;
  double a = std::log(1e-12);
  double b = std::log(1e6);
  double p = b - kInvPhi * (b - a);
  double q = a + kInvPhi * (b - a);
  double fp = dual(std::exp(p));
  double fq = dual(std::exp(q));
  while (b - a > 1e-11) {
    if (fp >= fq) {
      b = q;
      q = p;
      fq = fp;
      p = b - kInvPhi * (b - a);
      fp = dual(std::exp(p));
    } else {
      a = p;
      p = q;
      fp = fq;
      q = a + kInvPhi * (b - a);
      fq = dual(std::exp(q));
    }
  }
  const double lam = std::exp(0.5 * (a + b));
  const double val = dual(lam);
  if (val > best.objective) best = {val, lam};
  return best;
}

QuadratureIntegrals integrals_quadrature(double gamma) {
  using boost::math::quadrature::gauss_kronrod;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
  auto value = [gamma, inv_sqrt_2pi](double h) {
    const double t = std::clamp(-h / (2.0 * gamma), 0.0, 2.0);
    return (h * t + gamma * t * t) * std::exp(-0.5 * h * h) * inv_sqrt_2pi;
  };
  const double cut = -4.0 * gamma;
  constexpr double kTol = 1e-11;
  constexpr unsigned kDepth = 15;
  QuadratureIntegrals out{};
  out.i11 = gauss_kronrod<double, 61>::integrate(value, std::max(cut, -40.0), 0.0, kDepth, kTol);
  out.i21 = cut > -40.0 ? gauss_kronrod<double, 61>::integrate(value, -40.0, cut, kDepth, kTol) : 0.0;
  return out;
}

SmallCase small_case(std::uint64_t seed) {
  const rng::CounterStream s(seed);
  std::uint64_t ctr = 0;
  const int n = 2 + static_cast<int>(s.bits(ctr++) % 5);      // 2..6
  const int m = 1 + static_cast<int>(s.bits(ctr++) % 5);      // 1..5
  const double sigma = 0.05 + 0.5 * rng::uniform_open(s.bits(ctr++));
  const double u = 1.0 / std::sqrt(static_cast<double>(n));

  SmallCase out;
  out.A.resize(m, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) out.A(i, j) = s.normal(ctr++);
  Vector xs(n);
  for (int j = 0; j < n; ++j) xs[j] = s.coin(ctr++) ? u : -u;
  out.y = out.A * xs;
  for (int i = 0; i < m; ++i) out.y[i] += sigma * s.normal(ctr++);
  out.c.resize(n);
  for (int j = 0; j < n; ++j) out.c[j] = s.normal(ctr++);
  out.c.normalize();

  const double box = box_ls_enumerate(out.A, out.y).residual_norm;
  const double scale = 1.05 + 0.6 * rng::uniform_open(s.bits(ctr++));
  // Keep r strictly positive when the box contains an exact solution.
  out.r = std::max(scale * box, 0.05 + 0.2 * rng::uniform_open(s.bits(ctr++)));
  return out;
}

OracleCheckReport run_oracle_check(int cases, std::uint64_t seed, double tol) {
  OracleCheckReport rep;
  // The objective moves by about 2 lambda r^2 per unit of relative radius
  // slack, so the ball tolerance must sit well below `tol`. The solver's KKT
  // stop is relative to |f|_inf, which grows with lambda, so it is tightened
  // until the absolute residual clears `tol` as well.
  SolverSettings settings;
  settings.radius_tol = 1e-10;
  settings.grad_tol = 1e-10;
  for (int i = 0; i < cases; ++i) {
    const auto sc = small_case(rng::mix(seed, static_cast<std::uint64_t>(i)));
    ++rep.cases;

    const auto ref_box = box_ls_enumerate(sc.A, sc.y);
    const auto box = solve_box_ls(sc.A, sc.y, settings);
    const double box_gap = std::abs(box.objective - ref_box.residual_norm);
    rep.worst_box_gap = std::max(rep.worst_box_gap, box_gap);
    rep.worst_kkt = std::max(rep.worst_kkt, box.kkt_residual);
    if (box_gap > tol || box.kkt_residual > tol || box.status != SolveStatus::Converged) {
      ++rep.box_failures;
      std::ostringstream msg;
      msg << "case " << i << ": box-ls gap " << box_gap << " kkt " << box.kkt_residual;
      rep.messages.push_back(msg.str());
    }

    const auto ref_step = clup_step_dual_scan(sc.A, sc.y, sc.c, sc.r);
    const auto step = solve_clup_step(sc.A, sc.y, sc.c, sc.r, settings);
    const double step_gap = std::abs(step.objective - ref_step.objective);
    rep.worst_clup_gap = std::max(rep.worst_clup_gap, step_gap);
    rep.worst_kkt = std::max(rep.worst_kkt, step.kkt_residual);
    if (step_gap > tol || step.kkt_residual > tol || step.status != SolveStatus::Converged) {
      ++rep.clup_failures;
      std::ostringstream msg;
      msg << "case " << i << ": clup-step gap " << step_gap << " kkt " << step.kkt_residual
          << " status " << to_string(step.status) << " probes " << step.probes.size()
          << " (oracle lambda " << ref_step.lambda << ", solver lambda " << step.lambda << ")";
      rep.messages.push_back(msg.str());
    }
  }
  return rep;
}

}  // namespace clup::oracle
