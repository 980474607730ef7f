// clup: run CLuP / CLuP-plt experiments, print first-iteration theory, and
// check the convex kernels against brute-force oracles.

#include <chrono>
#include <deque>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clup/harness.hpp"
#include "clup/model.hpp"
#include "clup/rdt_theory.hpp"
#include "oracles.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitFailureRate = 3;
constexpr double kMaxFailureRate = 0.01;

// Every `run` flag is kept as raw strings and validated by spec_from, so a
// flag and the same key in a config file go through one parser.
struct Flag {
  std::string key;
  std::vector<std::string> values;
  CLI::Option* opt = nullptr;
};

struct RunFlags {
  std::string config;
  std::deque<Flag> flags;  // stable addresses for CLI11
};

clup::harness::KeyValues collect(const RunFlags& f) {
  clup::harness::KeyValues kv;
  for (const auto& flag : f.flags)
    if (flag.opt->count() > 0) kv[flag.key] = flag.values;
  return kv;
}

int cmd_run(const RunFlags& flags) {
  using namespace clup::harness;
  ExperimentSpec spec;
  try {
    KeyValues kv = flags.config.empty() ? KeyValues{} : read_config_file(flags.config);
    spec = spec_from(merge(std::move(kv), collect(flags)));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const auto result = run_experiment(spec);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  try {
    for (const auto& p : emit_outputs(result)) std::cerr << "wrote " << p.string() << '\n';
  } catch (const clup::Error& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (spec.emit.contains(Emit::Table)) std::cout << format_tables(result);
  std::cerr << "elapsed " << secs << " s\n";

  const double rate = result.failure_rate();
  if (rate > kMaxFailureRate) {
    std::cerr << "failure rate " << rate << " exceeds " << kMaxFailureRate << '\n';
    for (const auto& c : result.cells)
      for (const auto& t : c.trials)
        if (!t.ok) std::cerr << "  " << clup::to_string(c.variant) << " " << c.snr_db << " dB trial " << t.trial << ": " << t.error << '\n';
    return kExitFailureRate;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CLuP / CLuP-plt MIMO detection experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(CLUP_VERSION));

  RunFlags rf;
  auto* run = app.add_subcommand("run", "Monte Carlo experiment over a grid of variants and SNRs");
  run->add_option("--config", rf.config, "flat key=value file; flags override it")->check(CLI::ExistingFile);
  auto add = [&](const char* name, const char* help) {
    auto& f = rf.flags.emplace_back();
    f.key = name;
    f.opt = run->add_option(std::string("--") + name, f.values, help)
                ->expected(1)
                ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    return f.opt;
  };
  add("n", "input dimension (default 800)");
  add("alpha", "m/n ratio (default 0.8)");
  add("snr-db", "1/sigma^2 in dB (repeatable)");
  add("r-sc", "radius scale, r = r_sc * r_plt (default 1.3)");
  add("variant", "clup | clup-plt (repeatable)");
  add("trials", "trials per cell (default 50)");
  add("max-iters", "outer iteration budget (default 3)");
  add("seed", "master seed (default 1)");
  add("out", "output directory (default ./out)");
  add("emit", "comma list of csv, json, table (default all)");
  add("workers", "worker threads (default: hardware concurrency)");
  add("early-stop-tol", "stop when |s_hat(k) - s_hat(k-1)| < tol (default 0, off)");
  add("grad-tol", "projected-gradient tolerance (default 1e-8)");
  add("radius-tol", "relative ball tolerance (default 1e-6)");
  add("max-inner-iters", "inner solver iteration cap (default 20000)");
  add("max-bisect-iters", "multiplier probes per CLuP step (default 200)");

  double th_alpha = 0.8;
  double th_snr = 13.0;
  auto* th = app.add_subcommand("theory", "first-iteration saddle point and predicted statistics");
  th->add_option("--alpha", th_alpha, "m/n ratio")->capture_default_str();
  th->add_option("--snr-db", th_snr, "1/sigma^2 in dB")->capture_default_str();

  int oc_cases = 100;
  std::uint64_t oc_seed = 2024;
  auto* oc = app.add_subcommand("oracle-check", "compare the convex kernels with brute-force oracles");
  oc->add_option("--cases", oc_cases, "number of seeded instances")->capture_default_str();
  oc->add_option("--seed", oc_seed, "seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(rf);
    if (*th) {
      if (!(th_alpha > 0.0)) {
        std::cerr << "config error: alpha must be positive\n";
        return kExitConfig;
      }
      const auto t = clup::theory::solve_first_iteration(th_alpha, clup::snr_db_to_sigma(th_snr));
      std::cout << clup::harness::format_theory(t, th_snr);
      return kExitOk;
    }
    if (*oc) {
      const auto rep = clup::oracle::run_oracle_check(oc_cases, oc_seed);
      for (const auto& m : rep.messages) std::cout << m << '\n';
      std::cout << "cases " << rep.cases << ", box-ls failures " << rep.box_failures << ", clup-step failures "
                << rep.clup_failures << ", worst gaps " << rep.worst_box_gap << " / " << rep.worst_clup_gap
                << ", worst kkt " << rep.worst_kkt << '\n';
      return rep.passed() ? kExitOk : 1;
    }
  } catch (const clup::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
