#include "clup/clup_engine.hpp"

#include <cmath>
#include <string>

#include "clup/rng.hpp"

namespace clup {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::RandomStart:
      return "clup";
    case Variant::PolytopeStart:
      return "clup-plt";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "clup") return Variant::RandomStart;
  if (name == "clup-plt") return Variant::PolytopeStart;
  throw Error("unknown variant '" + std::string(name) + "' (expected clup or clup-plt)");
}

const char* to_string(StopReason s) { return s == StopReason::Budget ? "budget" : "early-stop"; }

void ClupConfig::validate() const {
  if (!(r_sc > 0.0) || !std::isfinite(r_sc)) throw Error("r_sc must be positive");
  if (max_iters < 1) throw Error("max_iters must be >= 1");
  if (!(early_stop_tol >= 0.0)) throw Error("early_stop_tol must be nonnegative");
  solver.validate();
}

namespace {

constexpr std::uint64_t kStartStream = 0x7830;  // "x0"

Iterate make_iterate(int k, Vector x_s, const ProblemInstance& inst, double residual_norm) {
  const double norm = x_s.norm();
  if (!(norm > 0.0)) throw Error("iterate " + std::to_string(k) + " has zero norm");
  Iterate it;
  it.k = k;
  it.x = x_s / norm;
  it.z = inst.x_sol - x_s;
  it.x_s = std::move(x_s);
  it.residual_norm = residual_norm;
  return it;
}

Iterate polytope_start(const ProblemInstance& inst, const LeastSquaresSystem& sys, const SolverSettings& settings) {
  auto box = solve_box_ls(sys, settings);
  if (box.status != SolveStatus::Converged)
    throw SolverLimitError("box least squares hit its iteration cap (kkt " + std::to_string(box.kkt_residual) + ")");
  return make_iterate(1, std::move(box.x), inst, box.residual_norm);
}

}  // namespace

Iterate init_polytope(const ProblemInstance& instance, const ClupConfig& cfg) {
  cfg.validate();
  const LeastSquaresSystem sys(instance.A, instance.y);
  return polytope_start(instance, sys, cfg.solver);
}

Iterate init_random(const ProblemInstance& instance, const ClupConfig& cfg) {
  const rng::CounterStream stream(rng::mix(cfg.seed, kStartStream));
  const double u = instance.box_bound();
  Vector x0(instance.n);
  for (int i = 0; i < instance.n; ++i) x0[i] = stream.coin(static_cast<std::uint64_t>(i)) ? u : -u;
  const double res = (instance.y - instance.A * x0).norm();
  return make_iterate(0, std::move(x0), instance, res);
}

Trajectory run(const ProblemInstance& instance, const ClupConfig& cfg) {
  cfg.validate();
  const LeastSquaresSystem sys(instance.A, instance.y);

  Trajectory traj;
  Iterate plt = polytope_start(instance, sys, cfg.solver);
  traj.r_plt = plt.residual_norm;
  traj.r = cfg.r_sc * traj.r_plt;
  // An (almost) exact fit inside the box leaves a ball whose radius is at the
  // solver's own precision; the bisection cannot resolve it.
  if (traj.r_plt <= std::sqrt(cfg.solver.grad_tol) * instance.y.norm())
    throw DegenerateError("box relaxation fits y exactly (r_plt = " + std::to_string(traj.r_plt) + ")");

  // Everything handed to record_iteration, including the k = 0 carrier.
  std::vector<Iterate> history;
  int k = 1;
  if (cfg.variant == Variant::PolytopeStart) {
    history.push_back(std::move(plt));
  } else {
    traj.start = init_random(instance, cfg);
    history.push_back(*traj.start);
    k = 0;
  }

  auto record_last = [&] {
    traj.records.push_back(record_iteration(history, history.back().k, instance.sigma, instance.x_sol));
  };
  if (history.back().k >= 1) record_last();

  ClupStepHint hint;
  while (k < cfg.max_iters) {
    const Iterate& prev = history.back();
    if (prev.k >= 1) hint.x = prev.x_s;
    auto step = solve_clup_step(sys, prev.x, traj.r, cfg.solver, &hint);
    if (step.status != SolveStatus::Converged)
      throw SolverLimitError("CLuP step " + std::to_string(k + 1) + " hit its iteration cap");
    if (step.lambda > 0.0) hint.lambda = step.lambda;
    ++k;
    history.push_back(make_iterate(k, std::move(step.x), instance, step.residual_norm));
    record_last();

    const auto& recs = traj.records;
    const bool has_two_steps = recs.size() >= 2 && (cfg.variant == Variant::RandomStart || recs.size() >= 3);
    if (cfg.early_stop_tol > 0.0 && has_two_steps &&
        std::abs(recs.back().s_hat - recs[recs.size() - 2].s_hat) < cfg.early_stop_tol) {
      traj.stop_reason = StopReason::EarlyStop;
      break;
    }
  }

  for (auto& it : history)
    if (it.k >= 1) traj.iterates.push_back(std::move(it));
  return traj;
}

}  // namespace clup
