#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "clup/convex_kernels.hpp"
#include "clup/error.hpp"
#include "clup/metrics.hpp"
#include "clup/model.hpp"

namespace clup {

enum class Variant {
  RandomStart,    // CLuP: x^(0) uniform over {-1/sqrt(n), +1/sqrt(n)}^n
  PolytopeStart,  // CLuP-plt: box least-squares solution is iterate 1
};

const char* to_string(Variant v);
/// Accepts the CLI spellings "clup" and "clup-plt".
Variant parse_variant(std::string_view name);

struct ClupConfig {
  Variant variant = Variant::PolytopeStart;
  double r_sc = 1.3;
  int max_iters = 3;
  double early_stop_tol = 1e-4;  // 0 disables
  SolverSettings solver;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Iterate {
  int k = 0;
  Vector x_s;  // un-normalized subproblem solution x^(k,s)
  Vector x;    // x_s / |x_s|
  Vector z;    // x_sol - x_s
  double residual_norm = 0.0;
};

enum class StopReason { Budget, EarlyStop };

const char* to_string(StopReason s);

struct Trajectory {
  double r_plt = 0.0;
  double r = 0.0;
  std::optional<Iterate> start;  // k = 0 carrier (RandomStart only)
  std::vector<Iterate> iterates;
  std::vector<IterationRecord> records;
  StopReason stop_reason = StopReason::Budget;
};

/// A subproblem hit an iteration cap; the trajectory is abandoned.
class SolverLimitError : public Error {
 public:
  using Error::Error;
};

/// The box contains a (numerically) exact fit of y, so r_plt ~ 0 and the
/// CLuP ball is degenerate.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Box least-squares start: iterate k = 1 with x_s = x^(0,plt); its
/// residual_norm is r_plt.
Iterate init_polytope(const ProblemInstance& instance, const ClupConfig& cfg);

/// Random sign start: iterate k = 0 with x_s = x = x^(0) drawn from cfg.seed.
Iterate init_random(const ProblemInstance& instance, const ClupConfig& cfg);

/// Runs the outer iterations with r = r_sc * r_plt.
Trajectory run(const ProblemInstance& instance, const ClupConfig& cfg);

}  // namespace clup
