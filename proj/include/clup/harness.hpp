#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "clup/clup_engine.hpp"
#include "clup/metrics.hpp"
#include "clup/rdt_theory.hpp"

namespace clup::harness {

/// Bad flags or config-file entries (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Emit { Csv, Json, Table };

struct ExperimentSpec {
  int n = 800;
  double alpha = 0.8;
  std::vector<double> snr_db_list{13.0};
  double r_sc = 1.3;
  std::vector<Variant> variants{Variant::PolytopeStart};
  int trials = 50;
  int max_iters = 3;
  double early_stop_tol = 0.0;  // experiments run the full budget by default
  std::uint64_t master_seed = 1;
  std::filesystem::path output_dir = "out";
  std::set<Emit> emit{Emit::Csv, Emit::Json, Emit::Table};
  int workers = 0;  // 0 = hardware concurrency
  SolverSettings solver;

  void validate() const;
};

/// Flat `key=value` settings; a key may repeat (e.g. snr-db).
using KeyValues = std::map<std::string, std::vector<std::string>>;

/// Parses a config file: one `key=value` per line, `#` comments, blank lines
/// ignored. Keys match the long flag names without dashes prefix.
KeyValues read_config_file(const std::filesystem::path& path);
KeyValues parse_config_text(const std::string& text);

/// Values in `overrides` replace those in `base` key by key.
KeyValues merge(KeyValues base, const KeyValues& overrides);

/// Builds a validated spec; unknown keys or malformed values raise ConfigError.
ExperimentSpec spec_from(const KeyValues& kv);

/// Instance seed for one trial. Independent of the variant so both variants
/// see identical (A, v) pairs.
std::uint64_t instance_seed(std::uint64_t master_seed, double snr_db, int trial);
/// Seed of the random start for one trial of one variant.
std::uint64_t start_seed(std::uint64_t master_seed, Variant variant, double snr_db, int trial);

struct TrialOutcome {
  int trial = 0;
  bool ok = false;
  std::string error;
  double r_plt = 0.0;
  std::vector<IterationRecord> records;
};

struct CellResult {
  Variant variant = Variant::PolytopeStart;
  double snr_db = 0.0;
  double sigma = 0.0;
  std::vector<TrialOutcome> trials;  // ordered by trial index
  int failures = 0;
  AggregateStats stats;              // over successful trials
  theory::TheoryFirstIter theory;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<CellResult> cells;  // variant-major, then snr order of the spec

  double failure_rate() const;
};

ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Output writers. Each returns its text so callers can test without files.
std::string format_csv(const ExperimentResult& result);
std::string format_json(const ExperimentResult& result);
std::string format_tables(const ExperimentResult& result);
std::string format_theory(const theory::TheoryFirstIter& t, double snr_db);

/// Writes trials.csv / summary.json / tables.txt under spec.output_dir
/// according to spec.emit. Throws Error if the directory is unwritable.
std::vector<std::filesystem::path> emit_outputs(const ExperimentResult& result);

}  // namespace clup::harness
