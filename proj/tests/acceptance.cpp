// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "clup/clup_engine.hpp"
#include "clup/convex_kernels.hpp"
#include "clup/harness.hpp"
#include "clup/metrics.hpp"
#include "clup/rdt_theory.hpp"
#include "clup/rng.hpp"
#include "oracles.hpp"

using namespace clup;

namespace {

constexpr int kTrials = 100;
constexpr std::uint64_t kSeed = 1;
constexpr int kCases = 200;

class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

  // Records one check; `detail` is printed either way.
  bool check(bool ok, const std::string& detail) {
    ok_ = ok_ && ok;
    lines_.push_back(std::string(ok ? "ok   " : "FAIL ") + detail);
    return ok;
  }

  void runtime_limit(double limit_s) {
    const double s = seconds();
    check(s <= limit_s, "runtime " + fmt(s, 1) + " s <= " + fmt(limit_s, 0) + " s");
  }

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  bool report() const {
    std::printf("%s  %s (%.1f s)\n", ok_ ? "PASS" : "FAIL", name_.c_str(), seconds());
    for (const auto& l : lines_) std::printf("      %s\n", l.c_str());
    std::fflush(stdout);
    return ok_;
  }

  static std::string fmt(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
  }

  static std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point start_;
  bool ok_ = true;
  std::vector<std::string> lines_;
};

std::string abs_band(const char* label, double got, double want, double tol, int digits) {
  return std::string(label) + " " + Criterion::fmt(got, digits) + " vs " + Criterion::fmt(want, digits) +
         " +/- " + Criterion::sci(tol);
}

bool within(Criterion& c, const char* label, double got, double want, double tol, int digits) {
  return c.check(std::abs(got - want) <= tol, abs_band(label, got, want, tol, digits));
}

// |mean - want| <= 3 standard errors.
bool within_se(Criterion& c, const char* label, const Summary& s, double want, int digits) {
  const double band = 3.0 * s.std_error;
  return c.check(std::abs(s.mean - want) <= band,
                 std::string(label) + " " + Criterion::fmt(s.mean, digits) + " vs " + Criterion::fmt(want, digits) +
                     " (3 se = " + Criterion::sci(band) + ")");
}

const IterationSummary& at(const harness::CellResult& cell, int k) {
  for (const auto& s : cell.stats.per_iteration)
    if (s.k == k) return s;
  throw Error("iteration " + std::to_string(k) + " missing");
}

harness::ExperimentSpec sim_spec(std::vector<Variant> variants, double snr, int iters) {
  harness::ExperimentSpec spec;
  spec.n = 800;
  spec.alpha = 0.8;
  spec.r_sc = 1.3;
  spec.snr_db_list = {snr};
  spec.variants = std::move(variants);
  spec.trials = kTrials;
  spec.max_iters = iters;
  spec.early_stop_tol = 0.0;
  spec.master_seed = kSeed;
  spec.workers = 0;
  return spec;
}

void no_failures(Criterion& c, const harness::ExperimentResult& r) {
  int failed = 0;
  for (const auto& cell : r.cells) failed += cell.failures;
  c.check(failed == 0, "failed trials: " + std::to_string(failed));
}

bool criterion_theory() {
  Criterion c("1. first-iteration theory, alpha 0.8, 13 dB");
  const auto t = theory::solve_first_iteration(0.8, snr_db_to_sigma(13.0));
  within(c, "gamma_hat", t.gamma_hat, 1.2233, 1e-3, 5);
  within(c, "c1z_hat", t.c1z_hat, 0.0835, 1e-3, 5);
  within(c, "xi", t.xi, 0.1226, 1e-3, 5);
  within(c, "p_err1", t.p_err1, 0.0072, 2e-4, 5);
  within(c, "d2_pred", t.d2_pred, 0.7574, 1e-3, 5);
  within(c, "d1_pred", t.d1_pred, 0.8369, 1e-3, 5);
  c.runtime_limit(5.0);
  return c.report();
}

bool criterion_quadrature() {
  Criterion c("2. closed-form integrals vs adaptive quadrature");
  const rng::CounterStream s(0xacce97);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const double gamma = 0.05 + 9.95 * rng::uniform_open(s.bits(i));
    const auto cf = theory::integrals_i(gamma);
    const auto q = oracle::integrals_quadrature(gamma);
    worst = std::max({worst, std::abs(cf.i11 - q.i11), std::abs(cf.i21 - q.i21)});
  }
  c.check(worst <= 1e-8, "worst |closed form - quadrature| over 20 gammas in [0.05, 10]: " + Criterion::sci(worst) +
                             " <= 1e-8");
  c.runtime_limit(30.0);
  return c.report();
}

bool criterion_oracles() {
  Criterion c("3. subproblem solvers vs brute-force oracles");
  const auto rep = oracle::run_oracle_check(100, 2024);
  c.check(rep.cases == 100, "cases " + std::to_string(rep.cases));
  c.check(rep.box_failures == 0 && rep.worst_box_gap <= 1e-6,
          "box LS vs enumeration: failures " + std::to_string(rep.box_failures) + ", worst gap " +
              Criterion::sci(rep.worst_box_gap));
  c.check(rep.clup_failures == 0 && rep.worst_clup_gap <= 1e-6,
          "CLuP step vs dual scan: failures " + std::to_string(rep.clup_failures) + ", worst gap " +
              Criterion::sci(rep.worst_clup_gap));
  c.check(rep.worst_kkt < 1e-6, "worst KKT residual " + Criterion::sci(rep.worst_kkt) + " < 1e-6");
  for (const auto& m : rep.messages) c.check(false, m);
  c.runtime_limit(120.0);
  return c.report();
}

bool criteria_13db() {
  bool all = true;
  Criterion c4("4. CLuP-plt at 13 dB, reference simulated values");
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = harness::run_experiment(sim_spec({Variant::PolytopeStart, Variant::RandomStart}, 13.0, 5));
  const double run_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& plt = res.cells.at(0);
  const auto& rnd = res.cells.at(1);

  {
    Criterion& c = c4;
    no_failures(c, res);
    within_se(c, "p_err(1)", at(plt, 1).p_err, 0.00776, 5);
    within_se(c, "-s_hat(2)", at(plt, 2).s_hat, 0.9495, 4);
    within_se(c, "d2(2)", at(plt, 2).d2, 0.9390, 4);
    within_se(c, "d1(2)", at(plt, 2).d1, 0.9616, 4);
    within_se(c, "-s_hat(3)", at(plt, 3).s_hat, 0.9710, 4);
    within_se(c, "d1(3)", at(plt, 3).d1, 0.9661, 4);
    c.check(at(plt, 2).p_err.mean <= 0.002, "p_err(2) " + Criterion::fmt(at(plt, 2).p_err.mean, 5) + " <= 0.002");
    c.check(at(plt, 3).p_err.mean <= 0.004, "p_err(3) " + Criterion::fmt(at(plt, 3).p_err.mean, 5) + " <= 0.004");
    // Theory vs simulation for iteration 1.
    within_se(c, "d1(1) vs theory", at(plt, 1).d1, plt.theory.d1_pred, 4);
    within_se(c, "d2(1) vs theory", at(plt, 1).d2, plt.theory.d2_pred, 4);
    c.check(run_s <= 600.0, "simulation " + Criterion::fmt(run_s, 1) + " s for both variants, " +
                                std::to_string(kTrials) + " trials x 5 iterations each (limit 600 s)");
    all = c.report() && all;
  }
  {
    Criterion c("5. CLuP random start at 13 dB, reference values and paired seeds");
    no_failures(c, res);
    within_se(c, "d1(1)", at(rnd, 1).d1, 0.7658, 4);
    within_se(c, "p_err(1)", at(rnd, 1).p_err, 0.0447, 5);
    within_se(c, "p_err(4)", at(rnd, 4).p_err, 0.00033, 5);
    within_se(c, "s_hat(5)", at(rnd, 5).s_hat, 0.9719, 4);
    c.check(at(plt, 2).p_err.mean < at(rnd, 2).p_err.mean,
            "paired p_err(2): plt " + Criterion::fmt(at(plt, 2).p_err.mean, 5) + " < random " +
                Criterion::fmt(at(rnd, 2).p_err.mean, 5));
    all = c.report() && all;
  }
  {
    Criterion c("6. simulated Q matrix at 13 dB, CLuP-plt");
    const auto& q = plt.stats.q_matrix;
    within(c, "Q(2,1)", q(1, 0), 0.8300, 0.02, 4);
    within(c, "Q(3,1)", q(2, 0), 0.7915, 0.02, 4);
    within(c, "Q(3,2)", q(2, 1), 0.9893, 0.02, 4);
    c.check((q - q.transpose()).cwiseAbs().maxCoeff() == 0.0 && (q.diagonal().array() == 1.0).all(),
            "symmetric with unit diagonal");
    all = c.report() && all;
  }
  return all;
}

void monotone(Criterion& c, const harness::CellResult& cell, const char* label) {
  const auto& it = cell.stats.per_iteration;
  bool ok = true;
  std::string seq;
  for (std::size_t i = 0; i < it.size(); ++i) {
    seq += (i ? " " : "") + Criterion::fmt(it[i].p_err.mean, 5);
    if (i > 0 && it[i].p_err.mean > it[i - 1].p_err.mean + it[i].p_err.std_error) ok = false;
  }
  c.check(ok, std::string(label) + " p_err nonincreasing within 1 se: " + seq);
}

bool criterion_snr_sweep() {
  Criterion c("7. CLuP-plt at 12 dB and 11 dB, reference values");
  const auto r12 = harness::run_experiment(sim_spec({Variant::PolytopeStart}, 12.0, 5));
  no_failures(c, r12);
  const auto& c12 = r12.cells.at(0);
  within(c, "12 dB p_err(5)", at(c12, 5).p_err.mean, 0.00085, 0.0004, 5);
  within(c, "12 dB -s_hat(5)", at(c12, 5).s_hat.mean, 0.9677, 0.01, 4);
  monotone(c, c12, "12 dB");

  const auto r11 = harness::run_experiment(sim_spec({Variant::PolytopeStart}, 11.0, 8));
  no_failures(c, r11);
  const auto& c11 = r11.cells.at(0);
  within(c, "11 dB p_err(8)", at(c11, 8).p_err.mean, 0.00255, 0.001, 5);
  within(c, "11 dB d2(8)", at(c11, 8).d2.mean, 0.9348, 0.01, 4);
  monotone(c, c11, "11 dB");
  c.runtime_limit(25.0 * 60.0);
  return c.report();
}

// Random small instance for the property suites.
ProblemInstance random_instance(std::uint64_t stream, std::uint64_t i) {
  const rng::CounterStream s(rng::mix(stream, i));
  const int n = 10 + static_cast<int>(s.bits(0) % 70);
  const double alpha = 0.8 + 0.6 * rng::uniform_open(s.bits(1));
  const double sigma = 0.05 + 0.5 * rng::uniform_open(s.bits(2));
  return generate_instance(n, alpha, sigma, rng::mix(stream, i + 0x100000));
}

bool criterion_invariants() {
  Criterion c("8. invariant suites (200 randomized cases each)");

  {  // Box LS: feasibility and coordinatewise KKT certificate.
    int bad = 0;
    for (std::uint64_t i = 0; i < kCases; ++i) {
      const auto inst = random_instance(0xb0c5, i);
      const SolverSettings st;
      const auto r = solve_box_ls(inst.A, inst.y, st);
      const double u = inst.box_bound();
      const Vector g = inst.A.transpose() * (inst.A * r.x - inst.y);
      const double tol = st.grad_tol * (1.0 + (inst.A.transpose() * inst.y).lpNorm<Eigen::Infinity>());
      bool ok = r.status == SolveStatus::Converged && r.x.cwiseAbs().maxCoeff() <= u;
      for (int j = 0; j < inst.n; ++j) {
        const bool interior = std::abs(g[j]) <= tol;
        const bool upper = r.x[j] >= u && g[j] <= 0.0;
        const bool lower = r.x[j] <= -u && g[j] >= 0.0;
        if (!(interior || upper || lower)) ok = false;
      }
      bad += !ok;
    }
    c.check(bad == 0, "box LS feasibility + KKT certificate: " + std::to_string(bad) + " of 200 violate");
  }

  {  // CLuP step: ball and box feasibility, converged KKT.
    int bad = 0;
    int done = 0;
    for (std::uint64_t i = 0; done < kCases; ++i) {
      const auto inst = random_instance(0xc10b, i);
      const SolverSettings st;
      const auto box = solve_box_ls(inst.A, inst.y, st);
      if (box.residual_norm <= 1e-4 * inst.y.norm()) continue;  // exact fit, not a CLuP regime
      ++done;
      const rng::CounterStream s(rng::mix(0xc10c, i));
      Vector cdir(inst.n);
      for (int j = 0; j < inst.n; ++j) cdir[j] = s.normal(static_cast<std::uint64_t>(j));
      cdir.normalize();
      const double r = 1.3 * box.residual_norm;
      const auto step = solve_clup_step(inst.A, inst.y, cdir, r, st);
      const bool ok = step.status == SolveStatus::Converged && step.residual_norm <= r * (1.0 + st.radius_tol) &&
                      step.x.cwiseAbs().maxCoeff() <= inst.box_bound() &&
                      step.objective <= -cdir.dot(box.x) + 1e-8;
      bad += !ok;
    }
    c.check(bad == 0, "CLuP step feasibility + dominance over the box-LS point: " + std::to_string(bad) +
                          " of 200 violate");
  }

  {  // Trajectory identities.
    int bad = 0;
    int done = 0;
    for (std::uint64_t i = 0; done < kCases; ++i) {
      const auto inst = random_instance(0x7a1e, i);
      ClupConfig cfg;
      cfg.variant = i % 2 ? Variant::RandomStart : Variant::PolytopeStart;
      cfg.max_iters = 4;
      cfg.early_stop_tol = 0.0;
      cfg.seed = i;
      cfg.solver.radius_tol = 1e-10;
      Trajectory t;
      try {
        t = run(inst, cfg);
      } catch (const DegenerateError&) {
        continue;
      }
      ++done;
      bool ok = t.r == cfg.r_sc * t.r_plt && t.records.size() == t.iterates.size();
      for (std::size_t k = 0; k < t.records.size(); ++k) {
        const auto& rec = t.records[k];
        const auto& it = t.iterates[k];
        ok = ok && std::abs(rec.c2z - it.z.squaredNorm()) <= 1e-10 && rec.s3 == 1.0 - rec.d1;
        ok = ok && std::abs(rec.d1) <= std::sqrt(rec.d2) + 1e-12 && std::sqrt(rec.d2) <= 1.0 + 1e-6;
        ok = ok && std::abs(it.x.norm() - 1.0) <= 1e-10 && (it.z + it.x_s - inst.x_sol).cwiseAbs().maxCoeff() <= 1e-12;
        if (cfg.variant == Variant::RandomStart || it.k >= 2) ok = ok && it.residual_norm <= t.r * (1.0 + 1e-6);
        if (k >= 1 && t.iterates[k - 1].k >= 2) {
          const auto& prev = t.iterates[k - 1];
          ok = ok && prev.x.dot(it.x_s) >= prev.x.dot(prev.x_s) - 1e-8;
        }
        for (std::size_t j = 0; j < rec.s2.size(); ++j) {
          const auto& pj = t.iterates[j];
          ok = ok && std::abs(rec.s2[j] - (t.records[j].d1 - pj.x_s.dot(it.x_s))) <= 1e-10;
          const double swapped = q_entry(t.records[j].s3, it.x_s.dot(pj.z), t.records[j].c2z, rec.c2z, inst.sigma);
          ok = ok && std::abs(rec.q_row[j] - swapped) <= 1e-10;
        }
      }
      bad += !ok;
    }
    c.check(bad == 0, "trajectory identities (c2z = |z|^2, s3 = 1 - d1, s2 linkage, Q symmetry, overlaps, "
                      "feasibility chain, monotone objective): " + std::to_string(bad) + " of 200 violate");
  }

  {  // Thread-count determinism.
    harness::ExperimentSpec spec;
    spec.n = 60;
    spec.snr_db_list = {11.0, 13.0};
    spec.variants = {Variant::PolytopeStart, Variant::RandomStart};
    spec.trials = 50;
    spec.max_iters = 4;
    spec.master_seed = 5;
    spec.workers = 1;
    const auto one = harness::run_experiment(spec);
    spec.workers = 4;
    const auto four = harness::run_experiment(spec);
    c.check(harness::format_csv(one) == harness::format_csv(four) &&
                harness::format_json(one) == harness::format_json(four),
            "1 vs 4 workers over 200 trials: outputs byte-identical");
  }

  {  // Saddle stationarity and second-order signs.
    int bad = 0;
    double worst = 0.0;
    const rng::CounterStream s(0x5add1e);
    for (std::uint64_t i = 0; i < kCases; ++i) {
      const double alpha = 0.6 + 1.4 * rng::uniform_open(s.bits(2 * i));
      const double sigma = snr_db_to_sigma(5.0 + 15.0 * rng::uniform_open(s.bits(2 * i + 1)));
      const auto t = theory::solve_first_iteration(alpha, sigma);
      auto xi = [&](double cz, double g) { return theory::xi_rd1(alpha, sigma, cz, g); };
      constexpr double h = 1e-6;
      const double dg = (xi(t.c1z_hat, t.gamma_hat + h) - xi(t.c1z_hat, t.gamma_hat - h)) / (2.0 * h);
      worst = std::max(worst, std::abs(dg));
      constexpr double step = 1e-3;
      bool ok = std::abs(dg) <= 1e-5 && xi(t.c1z_hat, t.gamma_hat + step) <= t.xi &&
                xi(t.c1z_hat, t.gamma_hat - step) <= t.xi &&
                theory::maximize_over_gamma(alpha, sigma, t.c1z_hat + step).value >= t.xi;
      if (t.c1z_hat > step) ok = ok && theory::maximize_over_gamma(alpha, sigma, t.c1z_hat - step).value >= t.xi;
      ok = ok && std::abs(t.e_zsq - t.c1z_hat) <= 1e-6 && std::abs(t.d2_pred - (t.e_zsq + 2.0 * t.d1_pred - 1.0)) <= 1e-12;
      bad += !ok;
    }
    c.check(bad == 0, "saddle stationarity (|d xi/d gamma| max " + Criterion::sci(worst) +
                          " <= 1e-5), max in gamma, min in c1z, e_zsq = c1z_hat: " + std::to_string(bad) +
                          " of 200 violate");
  }
  return c.report();
}

}  // namespace

int main() {
  std::printf("acceptance suite: %d trials per Monte Carlo cell, master seed %llu\n", kTrials,
              static_cast<unsigned long long>(kSeed));
  std::fflush(stdout);
  const std::vector<std::function<bool()>> suites{criterion_theory, criterion_quadrature, criterion_oracles,
                                                  criteria_13db,    criterion_snr_sweep,  criterion_invariants};
  bool all = true;
  for (const auto& s : suites) {
    try {
      all = s() && all;
    } catch (const std::exception& e) {
      std::printf("FAIL  (suite aborted: %s)\n", e.what());
      all = false;
    }
  }
  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return all ? 0 : 1;
}
