#include "clup/convex_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "clup/error.hpp"

namespace clup {

void SolverSettings::validate() const {
  if (!(grad_tol > 0.0)) throw Error("grad_tol must be positive");
  if (!(radius_tol > 0.0)) throw Error("radius_tol must be positive");
  if (max_inner_iters < 1) throw Error("max_inner_iters must be >= 1");
  if (max_bisect_iters < 1) throw Error("max_bisect_iters must be >= 1");
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::IterLimit:
      return "iter-limit";
  }
  return "?";
}

double projected_gradient_norm(const Vector& x, const Vector& g, double bound) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double p = std::clamp(x[i] - g[i], -bound, bound);
    worst = std::max(worst, std::abs(x[i] - p));
  }
  return worst;
}

namespace {

constexpr int kPowerIters = 200;
constexpr double kPowerTol = 1e-6;
constexpr double kPowerInflation = 1.01;

// Power iteration on the symmetric PSD matrix represented by `apply`.
template <class Apply>
double power_iteration(Eigen::Index n, Apply&& apply) {
  Vector v = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  // Deterministic perturbation so v is not orthogonal to the top eigenvector
  // for structured inputs such as diag(1, 3).
  for (Eigen::Index i = 0; i < n; ++i) v[i] += 1e-3 * static_cast<double>(i + 1) / static_cast<double>(n);
  v.normalize();
  double rayleigh = 0.0;
  Vector w(n);
  for (int it = 0; it < kPowerIters; ++it) {
    apply(v, w);
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (it > 0 && std::abs(next - rayleigh) <= kPowerTol * std::abs(next)) {
      rayleigh = next;
      break;
    }
    rayleigh = next;
  }
  return rayleigh;
}

// Minimizes q(x) = 1/2 h x^T G x - f^T x over [-u, u]^n by gradient
// projection (step 1/(h L)) interleaved with conjugate-gradient minimization
// over the face identified by the projection steps (More & Toraldo, 1991).
class BoxQp {
 public:
  BoxQp(const Matrix& gram, double hess_scale, const Vector& linear, double bound, double lipschitz)
      : gram_(gram), h_(hess_scale), f_(linear), u_(bound), step_(1.0 / (hess_scale * lipschitz)) {}

  struct Outcome {
    Vector x;
    Vector grad;
    double kkt = 0.0;
    int iterations = 0;
    bool converged = false;
  };

  Outcome solve(Vector x, double tol, int max_iters) const {
    Outcome out;
    clamp(x);
    Vector gx = gram_ * x;
    Vector g = h_ * gx - f_;
    double q = value(x, gx);
    int iters = 0;
    Vector trial(x.size()), gtrial(x.size());
    bool subspace_ok = true;

    while (true) {
      out.kkt = projected_gradient_norm(x, g, u_);
      if (out.kkt <= tol) {
        out.converged = true;
        break;
      }
      if (iters >= max_iters) break;

      // Gradient projection until the active face settles or progress stalls.
      double best_drop = 0.0;
      for (int gp = 0; gp < kMaxProjectionSteps && iters < max_iters; ++gp) {
        trial = x - step_ * g;
        clamp(trial);
        gtrial.noalias() = gram_ * trial;
        const double qt = value(trial, gtrial);
        ++iters;
        const bool same_face = same_active_set(x, trial);
        const double drop = q - qt;
        // A step of 1/(h L) never increases q in exact arithmetic, so the
        // step is taken even when rounding makes q tick upward.
        x.swap(trial);
        gx.swap(gtrial);
        q = qt;
        g = h_ * gx - f_;
        best_drop = std::max(best_drop, drop);
        // After a failed subspace step, keep projecting until progress stalls.
        if ((same_face && subspace_ok) || drop <= kProjectionStall * best_drop) break;
      }

      out.kkt = projected_gradient_norm(x, g, u_);
      if (out.kkt <= tol) {
        out.converged = true;
        break;
      }
      if (iters >= max_iters) break;

      const int spent = subspace_step(x, gx, g, q, tol, max_iters - iters, subspace_ok);
      iters += std::max(spent, 1);
    }
    out.x = std::move(x);
    out.grad = std::move(g);
    out.iterations = iters;
    return out;
  }

 private:
  static constexpr int kMaxProjectionSteps = 50;
  static constexpr double kProjectionStall = 0.1;
  static constexpr double kArmijo = 1e-4;
  static constexpr int kMaxBacktracks = 40;
  static constexpr double kFlatCurvature = 1e-10;

  void clamp(Vector& x) const { x = x.cwiseMax(-u_).cwiseMin(u_); }

  double value(const Vector& x, const Vector& gx) const { return 0.5 * h_ * x.dot(gx) - f_.dot(x); }

  bool same_active_set(const Vector& a, const Vector& b) const {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const int sa = a[i] <= -u_ ? -1 : (a[i] >= u_ ? 1 : 0);
      const int sb = b[i] <= -u_ ? -1 : (b[i] >= u_ ? 1 : 0);
      if (sa != sb) return false;
    }
    return true;
  }

  // CG on the free coordinates followed by a projected backtracking search.
  // Returns the number of CG iterations spent; `ok` reports whether q dropped.
  int subspace_step(Vector& x, Vector& gx, Vector& g, double& q, double tol, int budget, bool& ok) const {
    ok = false;
    std::vector<Eigen::Index> free;
    free.reserve(static_cast<size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x[i] > -u_ && x[i] < u_) free.push_back(i);
    if (free.empty()) return 0;
    Vector xf(static_cast<Eigen::Index>(free.size()));
    for (size_t k = 0; k < free.size(); ++k) xf[static_cast<Eigen::Index>(k)] = x[free[k]];

    const auto nf = static_cast<Eigen::Index>(free.size());
    const Matrix sub = h_ * gram_(free, free);
    Vector rhs(nf);
    for (Eigen::Index k = 0; k < nf; ++k) rhs[k] = -g[free[static_cast<size_t>(k)]];

    // Solve sub * d = rhs by CG from d = 0.
    Vector d = Vector::Zero(nf);
    Vector res = rhs;
    Vector p = res;
    Vector ap(nf);
    double rr = res.squaredNorm();
    const double target = std::min(0.1 * tol, 1e-3 * std::sqrt(rr));
    int iters = 0;
    const int cap = std::min<int>(budget, static_cast<int>(2 * nf + 10));
    while (iters < cap && std::sqrt(rr) > target) {
      ap.noalias() = sub * p;
      const double curv = p.dot(ap);
      // The face is rank deficient when it has more free coordinates than
      // G has rank. Along a (near) null direction q falls linearly, so walk
      // to the first bound instead of letting CG wander.
      if (!(curv > kFlatCurvature / step_ * p.squaredNorm())) {
        d += to_first_bound(xf + d, p) * p;
        ++iters;
        break;
      }
      const double a = rr / curv;
      d += a * p;
      res -= a * ap;
      const double rr_next = res.squaredNorm();
      p = res + (rr_next / rr) * p;
      rr = rr_next;
      ++iters;
    }
    if (iters == 0) return 1;

    Vector dir = Vector::Zero(x.size());
    for (Eigen::Index k = 0; k < nf; ++k) dir[free[static_cast<size_t>(k)]] = d[k];

    Vector trial(x.size()), gtrial(x.size());
    double t = 1.0;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, t *= 0.5) {
      trial = x + t * dir;
      clamp(trial);
      gtrial.noalias() = gram_ * trial;
      const double qt = value(trial, gtrial);
      if (qt <= q + kArmijo * g.dot(trial - x)) {
        x.swap(trial);
        gx.swap(gtrial);
        g = h_ * gx - f_;
        q = qt;
        ok = true;
        break;
      }
    }
    return iters;
  }

  // Largest t >= 0 keeping z + t p inside the box.
  double to_first_bound(const Vector& z, const Vector& p) const {
    double t = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (p[k] > 0.0) t = std::min(t, (u_ - z[k]) / p[k]);
      else if (p[k] < 0.0) t = std::min(t, (-u_ - z[k]) / p[k]);
    }
    return std::isfinite(t) ? std::max(t, 0.0) : 0.0;
  }

  const Matrix& gram_;
  double h_;
  const Vector& f_;
  double u_;
  double step_;
};

Vector corner(const Vector& c, double bound) {
  Vector x(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) x[i] = c[i] < 0.0 ? -bound : bound;
  return x;
}

// Minimizer of the Lagrangian at multiplier lambda, warm-started from `warm`.
struct LagrangianSolve {
  Vector x;
  double residual_norm;
  double kkt;
  int iterations;
  bool converged;
};

LagrangianSolve solve_lagrangian(const LeastSquaresSystem& sys, const Vector& c, double lambda,
                                 const Vector& warm, const SolverSettings& settings) {
  const Vector linear = c + 2.0 * lambda * sys.aty();
  const BoxQp qp(sys.gram(), 2.0 * lambda, linear, sys.bound(), sys.lipschitz());
  const double tol = settings.grad_tol * (1.0 + linear.lpNorm<Eigen::Infinity>());
  auto out = qp.solve(warm, tol, settings.max_inner_iters);
  const double res = sys.residual_norm(out.x);
  return {std::move(out.x), res, out.kkt, out.iterations, out.converged};
}

// Both endpoints minimize the same Lagrangian, so every point on the segment
// does too; pick the one whose residual equals r.
Vector blend_to_radius(const LeastSquaresSystem& sys, const Vector& outside, const Vector& inside,
                       double r) {
  const Vector e0 = sys.y() - sys.A() * outside;
  const Vector de = sys.A() * (outside - inside);  // residual(t) = e0 + t*de
  const double a = de.squaredNorm();
  const double b = 2.0 * e0.dot(de);
  const double cc = e0.squaredNorm() - r * r;
  double t = 1.0;
  if (a > 0.0) {
    const double disc = std::max(0.0, b * b - 4.0 * a * cc);
    const double t1 = (-b - std::sqrt(disc)) / (2.0 * a);
    const double t2 = (-b + std::sqrt(disc)) / (2.0 * a);
    t = (t1 >= 0.0 && t1 <= 1.0) ? t1 : std::clamp(t2, 0.0, 1.0);
  }
  return outside + t * (inside - outside);
}

}  // namespace

double spectral_norm_sq(const Matrix& A) {
  if (A.size() == 0 || A.cwiseAbs().maxCoeff() == 0.0) throw Error("spectral_norm_sq: zero matrix");
  Vector tmp(A.rows());
  const double top = power_iteration(A.cols(), [&](const Vector& in, Vector& out) {
    tmp.noalias() = A * in;
    out.noalias() = A.transpose() * tmp;
  });
  return kPowerInflation * top;
}

LeastSquaresSystem::LeastSquaresSystem(const Matrix& A, const Vector& y) : A_(A), y_(y) {
  if (A.rows() != y.size()) throw Error("dimension mismatch between A and y");
  if (A.cols() < 1) throw Error("A has no columns");
  gram_ = Matrix::Zero(A.cols(), A.cols());
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
  gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
  aty_ = A.transpose() * y;
  lipschitz_ = spectral_norm_sq(A);
  bound_ = 1.0 / std::sqrt(static_cast<double>(A.cols()));
}

SubproblemResult solve_box_ls(const Matrix& A, const Vector& y, const SolverSettings& settings) {
  const LeastSquaresSystem sys(A, y);
  return solve_box_ls(sys, settings);
}

SubproblemResult solve_box_ls(const LeastSquaresSystem& sys, const SolverSettings& settings,
                              const Vector* warm_start) {
  settings.validate();
  const BoxQp qp(sys.gram(), 1.0, sys.aty(), sys.bound(), sys.lipschitz());
  const double tol = settings.grad_tol * (1.0 + sys.aty().lpNorm<Eigen::Infinity>());
  Vector start = warm_start ? *warm_start : Vector::Zero(sys.cols());
  auto out = qp.solve(std::move(start), tol, settings.max_inner_iters);

  SubproblemResult res;
  res.x = std::move(out.x);
  res.residual_norm = sys.residual_norm(res.x);
  res.objective = res.residual_norm;
  res.kkt_residual = out.kkt;
  res.status = out.converged ? SolveStatus::Converged : SolveStatus::IterLimit;
  res.inner_iterations = out.iterations;
  return res;
}

SubproblemResult solve_clup_step(const Matrix& A, const Vector& y, const Vector& c, double r,
                                 const SolverSettings& settings) {
  const LeastSquaresSystem sys(A, y);
  return solve_clup_step(sys, c, r, settings);
}

SubproblemResult solve_clup_step(const LeastSquaresSystem& sys, const Vector& c, double r,
                                 const SolverSettings& settings, const ClupStepHint* hint) {
  settings.validate();
  if (c.size() != sys.cols()) throw Error("objective direction has wrong length");
  if (!(r > 0.0) || !std::isfinite(r)) throw Error("radius must be positive and finite");
  if (c.cwiseAbs().maxCoeff() == 0.0) throw Error("objective direction is zero");

  SubproblemResult res;
  const double u = sys.bound();

  res.x = corner(c, u);
  res.residual_norm = sys.residual_norm(res.x);
  if (res.residual_norm <= r) {
    res.objective = -c.dot(res.x);
    res.corner_shortcut = true;
    res.kkt_residual = 0.0;
    return res;
  }
  res.probes.push_back({0.0, res.residual_norm});

  const double tol_r = settings.radius_tol * r;
  int inner_total = 0;
  int evaluations = 0;
  bool inner_ok = true;

  auto probe = [&](double lambda, const Vector& warm) {
    auto s = solve_lagrangian(sys, c, lambda, warm, settings);
    inner_total += s.iterations;
    inner_ok = inner_ok && s.converged;
    ++evaluations;
    res.probes.push_back({lambda, s.residual_norm});
    return s;
  };

  auto finish = [&](LagrangianSolve&& s, double lambda, SolveStatus status) {
    res.x = std::move(s.x);
    res.residual_norm = s.residual_norm;
    res.objective = -c.dot(res.x);
    res.kkt_residual = s.kkt;
    res.lambda = lambda;
    res.inner_iterations = inner_total;
    res.status = (status == SolveStatus::Converged && inner_ok) ? status : SolveStatus::IterLimit;
    return res;
  };

  // Bracket [lo, hi] with residual(lo) > r >= residual(hi); residual is
  // nonincreasing in lambda.
  const Vector start = (hint && hint->x) ? *hint->x : res.x;
  double hi = (hint && hint->lambda > 0.0) ? hint->lambda : 1.0;
  double lo = 0.0;
  LagrangianSolve at_hi = probe(hi, start);
  std::optional<LagrangianSolve> at_lo;

  if (std::abs(at_hi.residual_norm - r) <= tol_r) return finish(std::move(at_hi), hi, SolveStatus::Converged);

  if (at_hi.residual_norm > r) {
    constexpr double kLambdaCeiling = 1e300;
    while (at_hi.residual_norm > r) {
      if (hi > kLambdaCeiling || evaluations >= settings.max_bisect_iters) {
        const auto box = solve_box_ls(sys, settings, &at_hi.x);
        if (box.residual_norm > r * (1.0 + settings.radius_tol)) throw InfeasibleError(r, box.residual_norm);
        // Ball meets the box only at the least-squares face.
        return finish({box.x, box.residual_norm, box.kkt_residual, 0, true}, hi, SolveStatus::IterLimit);
      }
      lo = hi;
      at_lo = std::move(at_hi);
      hi *= 2.0;
      at_hi = probe(hi, at_lo->x);
      if (std::abs(at_hi.residual_norm - r) <= tol_r) return finish(std::move(at_hi), hi, SolveStatus::Converged);
    }
  } else {
    // Hint lands inside the ball: walk lambda down to find the other end.
    while (true) {
      const double next = hi * 0.5;
      auto s = probe(next, at_hi.x);
      if (std::abs(s.residual_norm - r) <= tol_r) return finish(std::move(s), next, SolveStatus::Converged);
      if (s.residual_norm > r) {
        lo = next;
        at_lo = std::move(s);
        break;
      }
      hi = next;
      at_hi = std::move(s);
      if (evaluations >= settings.max_bisect_iters) return finish(std::move(at_hi), hi, SolveStatus::IterLimit);
    }
  }

  while (evaluations < settings.max_bisect_iters) {
    const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
    if (!(mid > lo && mid < hi)) {
      // Bracket collapsed onto a jump of the residual map.
      if (at_lo) {
        Vector x = blend_to_radius(sys, at_lo->x, at_hi.x, r);
        const double rn = sys.residual_norm(x);
        const Vector g = -c - 2.0 * hi * (sys.A().transpose() * (sys.y() - sys.A() * x));
        const double kkt = projected_gradient_norm(x, g, u);
        return finish({std::move(x), rn, kkt, 0, true}, hi, SolveStatus::Converged);
      }
      break;
    }
    const Vector& warm = at_lo ? (at_lo->residual_norm - r < r - at_hi.residual_norm ? at_lo->x : at_hi.x) : at_hi.x;
    auto s = probe(mid, warm);
    if (std::abs(s.residual_norm - r) <= tol_r) return finish(std::move(s), mid, SolveStatus::Converged);
    if (s.residual_norm > r) {
      lo = mid;
      at_lo = std::move(s);
    } else {
      hi = mid;
      at_hi = std::move(s);
    }
  }
  return finish(std::move(at_hi), hi, SolveStatus::IterLimit);
}

}  // namespace clup
