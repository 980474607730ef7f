#include "clup/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "clup/model.hpp"
#include "clup/rng.hpp"

namespace clup::harness {

namespace {

using json = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("bad number for " + key + ": '" + v + "'");
  return out;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("bad integer for " + key + ": '" + v + "'");
  return out;
}

const std::string& single(const std::string& key, const std::vector<std::string>& values) {
  if (values.empty()) throw ConfigError("missing value for " + key);
  return values.back();
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

const char* emit_name(Emit e) {
  switch (e) {
    case Emit::Csv:
      return "csv";
    case Emit::Json:
      return "json";
    case Emit::Table:
      return "table";
  }
  return "?";
}

}  // namespace

void ExperimentSpec::validate() const {
  if (n < 1) throw ConfigError("n must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (snr_db_list.empty()) throw ConfigError("at least one snr-db is required");
  for (double s : snr_db_list)
    if (!std::isfinite(s)) throw ConfigError("snr-db must be finite");
  if (!(r_sc > 0.0)) throw ConfigError("r-sc must be positive");
  if (variants.empty()) throw ConfigError("at least one variant is required");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (max_iters < 1) throw ConfigError("max-iters must be >= 1");
  if (!(early_stop_tol >= 0.0)) throw ConfigError("early-stop-tol must be nonnegative");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  try {
    solver.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

KeyValues parse_config_text(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    auto key = trim(std::string_view(t).substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    const auto value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key].push_back(value);
  }
  return kv;
}

KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

KeyValues merge(KeyValues base, const KeyValues& overrides) {
  for (const auto& [k, v] : overrides) base[k] = v;
  return base;
}

ExperimentSpec spec_from(const KeyValues& kv) {
  ExperimentSpec spec;
  for (const auto& [key, values] : kv) {
    if (key == "n") {
      spec.n = to_int<int>(key, single(key, values));
    } else if (key == "alpha") {
      spec.alpha = to_double(key, single(key, values));
    } else if (key == "snr-db") {
      spec.snr_db_list.clear();
      for (const auto& v : values)
        for (const auto& item : split_list(v)) spec.snr_db_list.push_back(to_double(key, item));
    } else if (key == "r-sc") {
      spec.r_sc = to_double(key, single(key, values));
    } else if (key == "variant") {
      spec.variants.clear();
      for (const auto& v : values) {
        for (const auto& item : split_list(v)) {
          try {
            const Variant var = parse_variant(item);
            if (std::find(spec.variants.begin(), spec.variants.end(), var) == spec.variants.end())
              spec.variants.push_back(var);
          } catch (const Error& e) {
            throw ConfigError(e.what());
          }
        }
      }
    } else if (key == "trials") {
      spec.trials = to_int<int>(key, single(key, values));
    } else if (key == "max-iters") {
      spec.max_iters = to_int<int>(key, single(key, values));
    } else if (key == "early-stop-tol") {
      spec.early_stop_tol = to_double(key, single(key, values));
    } else if (key == "seed") {
      spec.master_seed = to_int<std::uint64_t>(key, single(key, values));
    } else if (key == "out") {
      spec.output_dir = single(key, values);
    } else if (key == "emit") {
      spec.emit.clear();
      for (const auto& v : values) {
        for (const auto& item : split_list(v)) {
          if (item == "csv") spec.emit.insert(Emit::Csv);
          else if (item == "json") spec.emit.insert(Emit::Json);
          else if (item == "table") spec.emit.insert(Emit::Table);
          else throw ConfigError("unknown emit target '" + item + "'");
        }
      }
    } else if (key == "workers") {
      spec.workers = to_int<int>(key, single(key, values));
    } else if (key == "grad-tol") {
      spec.solver.grad_tol = to_double(key, single(key, values));
    } else if (key == "radius-tol") {
      spec.solver.radius_tol = to_double(key, single(key, values));
    } else if (key == "max-inner-iters") {
      spec.solver.max_inner_iters = to_int<int>(key, single(key, values));
    } else if (key == "max-bisect-iters") {
      spec.solver.max_bisect_iters = to_int<int>(key, single(key, values));
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

std::uint64_t instance_seed(std::uint64_t master_seed, double snr_db, int trial) {
  std::uint64_t key = rng::mix(master_seed, 0x696e7374ULL);  // "inst"
  key = rng::mix(key, std::bit_cast<std::uint64_t>(snr_db));
  return rng::mix(key, static_cast<std::uint64_t>(trial));
}

std::uint64_t start_seed(std::uint64_t master_seed, Variant variant, double snr_db, int trial) {
  const std::uint64_t key = rng::mix(master_seed, 0x73747274ULL);  // "strt"
  return rng::mix(rng::mix(key, static_cast<std::uint64_t>(variant)), instance_seed(master_seed, snr_db, trial));
}

double ExperimentResult::failure_rate() const {
  std::size_t total = 0;
  std::size_t failed = 0;
  for (const auto& c : cells) {
    total += c.trials.size();
    failed += static_cast<std::size_t>(c.failures);
  }
  return total == 0 ? 0.0 : static_cast<double>(failed) / static_cast<double>(total);
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult result;
  result.spec = spec;

  for (Variant v : spec.variants) {
    for (double snr : spec.snr_db_list) {
      CellResult cell;
      cell.variant = v;
      cell.snr_db = snr;
      cell.sigma = snr_db_to_sigma(snr);
      cell.trials.resize(static_cast<std::size_t>(spec.trials));
      result.cells.push_back(std::move(cell));
    }
  }

  // One work item per (cell, trial); each writes only its own slot.
  const std::size_t per_cell = static_cast<std::size_t>(spec.trials);
  const std::size_t total = result.cells.size() * per_cell;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t item = next++; item < total; item = next++) {
      CellResult& cell = result.cells[item / per_cell];
      const int trial = static_cast<int>(item % per_cell);
      TrialOutcome& out = cell.trials[static_cast<std::size_t>(trial)];
      out.trial = trial;
      try {
        const auto inst = generate_instance(spec.n, spec.alpha, cell.sigma, instance_seed(spec.master_seed, cell.snr_db, trial));
        ClupConfig cfg;
        cfg.variant = cell.variant;
        cfg.r_sc = spec.r_sc;
        cfg.max_iters = spec.max_iters;
        cfg.early_stop_tol = spec.early_stop_tol;
        cfg.solver = spec.solver;
        cfg.seed = start_seed(spec.master_seed, cell.variant, cell.snr_db, trial);
        auto traj = run(inst, cfg);
        out.r_plt = traj.r_plt;
        out.records = std::move(traj.records);
        out.ok = true;
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
      }
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(total, spec.workers > 0 ? static_cast<std::size_t>(spec.workers) : hw);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (auto& cell : result.cells) {
    std::vector<std::vector<IterationRecord>> ok;
    for (const auto& t : cell.trials) {
      if (t.ok) ok.push_back(t.records);
      else ++cell.failures;
    }
    if (!ok.empty()) cell.stats = aggregate(ok);
    cell.theory = theory::solve_first_iteration(spec.alpha, cell.sigma);
  }
  return result;
}

std::string format_csv(const ExperimentResult& result) {
  int depth = 0;
  int first_k = 1;
  for (const auto& c : result.cells)
    for (const auto& t : c.trials)
      if (t.ok && !t.records.empty()) {
        depth = std::max(depth, static_cast<int>(t.records.size()));
        first_k = t.records.front().k;
      }
  const int last_k = first_k + depth - 1;

  std::ostringstream os;
  os << "variant,snr_db,alpha,n,r_sc,trial,iter,p_err,s_hat,d1,d2,s3,c2z";
  for (int k = first_k + 1; k <= last_k; ++k)
    for (int j = first_k; j < k; ++j) os << ",q_{" << k << ',' << j << '}';
  os << '\n';

  const auto& spec = result.spec;
  for (const auto& c : result.cells) {
    for (const auto& t : c.trials) {
      if (!t.ok) continue;
      for (const auto& r : t.records) {
        os << to_string(c.variant) << ',' << num(c.snr_db) << ',' << num(spec.alpha) << ',' << spec.n << ','
           << num(spec.r_sc) << ',' << t.trial << ',' << r.k << ',' << num(r.p_err) << ',' << num(r.s_hat) << ','
           << num(r.d1) << ',' << num(r.d2) << ',' << num(r.s3) << ',' << num(r.c2z);
        for (int k = first_k + 1; k <= last_k; ++k) {
          for (int j = first_k; j < k; ++j) {
            os << ',';
            const auto idx = static_cast<std::size_t>(j - first_k);
            if (k == r.k && idx < r.q_row.size()) os << num(r.q_row[idx]);
          }
        }
        os << '\n';
      }
    }
  }
  return os.str();
}

namespace {

json summary_json(const Summary& s) { return json{{"mean", s.mean}, {"std_error", s.std_error}}; }

json theory_json(const theory::TheoryFirstIter& t) {
  return json{{"alpha", t.alpha},       {"sigma", t.sigma}, {"gamma_hat", t.gamma_hat}, {"c1z_hat", t.c1z_hat},
              {"xi", t.xi},             {"nu_hat", t.nu_hat}, {"s1_hat", t.s1_hat},     {"p_err1", t.p_err1},
              {"e_z", t.e_z},           {"e_zsq", t.e_zsq}, {"d1_pred", t.d1_pred},     {"d2_pred", t.d2_pred}};
}

}  // namespace

std::string format_json(const ExperimentResult& result) {
  const auto& spec = result.spec;
  json config;
  config["n"] = spec.n;
  config["alpha"] = spec.alpha;
  config["snr_db"] = spec.snr_db_list;
  config["r_sc"] = spec.r_sc;
  json variants = json::array();
  for (auto v : spec.variants) variants.push_back(to_string(v));
  config["variants"] = variants;
  config["trials"] = spec.trials;
  config["max_iters"] = spec.max_iters;
  config["early_stop_tol"] = spec.early_stop_tol;
  config["seed"] = spec.master_seed;
  json emit = json::array();
  for (auto e : spec.emit) emit.push_back(emit_name(e));
  config["emit"] = emit;
  config["solver"] = json{{"grad_tol", spec.solver.grad_tol},
                          {"radius_tol", spec.solver.radius_tol},
                          {"max_inner_iters", spec.solver.max_inner_iters},
                          {"max_bisect_iters", spec.solver.max_bisect_iters}};
  config["rng"] = "splitmix64-counter/box-muller";

  json cells = json::array();
  for (const auto& c : result.cells) {
    json cell;
    cell["variant"] = to_string(c.variant);
    cell["snr_db"] = c.snr_db;
    cell["sigma"] = c.sigma;
    cell["trials"] = static_cast<int>(c.trials.size());
    cell["failures"] = c.failures;
    json errors = json::array();
    for (const auto& t : c.trials)
      if (!t.ok) errors.push_back(json{{"trial", t.trial}, {"error", t.error}});
    cell["errors"] = errors;
    json iters = json::array();
    for (const auto& s : c.stats.per_iteration) {
      iters.push_back(json{{"k", s.k},
                           {"count", s.count},
                           {"p_err", summary_json(s.p_err)},
                           {"s_hat", summary_json(s.s_hat)},
                           {"d1", summary_json(s.d1)},
                           {"d2", summary_json(s.d2)},
                           {"s3", summary_json(s.s3)},
                           {"c2z", summary_json(s.c2z)}});
    }
    cell["iterations"] = iters;
    json q = json::array();
    for (Eigen::Index a = 0; a < c.stats.q_matrix.rows(); ++a) {
      json row = json::array();
      for (Eigen::Index b = 0; b < c.stats.q_matrix.cols(); ++b) {
        const double v = c.stats.q_matrix(a, b);
        if (std::isnan(v)) row.push_back(nullptr);
        else row.push_back(v);
      }
      q.push_back(row);
    }
    cell["q_matrix"] = q;
    cell["theory"] = theory_json(c.theory);
    cells.push_back(cell);
  }

  json doc;
  doc["tool"] = "clup";
  doc["version"] = CLUP_VERSION;
  doc["config"] = config;
  doc["cells"] = cells;
  return doc.dump(2) + "\n";
}

std::string format_theory(const theory::TheoryFirstIter& t, double snr_db) {
  std::ostringstream os;
  os << "first-iteration theory (alpha=" << num(t.alpha) << ", 1/sigma^2=" << num(snr_db) << " dB)\n";
  const std::pair<const char*, double> rows[] = {
      {"nu_hat", t.nu_hat},   {"gamma_hat", t.gamma_hat}, {"c1z_hat", t.c1z_hat}, {"s1_hat", t.s1_hat},
      {"xi_rd1", t.xi},       {"p_err1", t.p_err1},       {"|x(1,s)|^2", t.d2_pred},
      {"x_sol^T x(1,s)", t.d1_pred}, {"sqrt(n) E z", t.e_z}, {"n E z^2", t.e_zsq}};
  for (const auto& [name, v] : rows) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "  %-16s %.6f\n", name, v);
    os << buf;
  }
  return os.str();
}

std::string format_tables(const ExperimentResult& result) {
  std::ostringstream os;
  const auto& spec = result.spec;
  for (const auto& c : result.cells) {
    os << to_string(c.variant) << " | 1/sigma^2=" << num(c.snr_db) << " dB | alpha=" << num(spec.alpha)
       << " | r_sc=" << num(spec.r_sc) << " | n=" << spec.n << " | trials=" << c.trials.size() - c.failures << '/'
       << c.trials.size() << '\n';
    char buf[256];
    std::snprintf(buf, sizeof buf, "%4s  %-22s %-18s %-18s %-18s\n", "k", "p_err", "-s_hat", "d2=|x(k,s)|^2",
                  "d1=x_sol^T x(k,s)");
    os << buf;
    for (const auto& s : c.stats.per_iteration) {
      auto cellf = [](const Summary& v, int digits) { return fixed(v.mean, digits) + " +/- " + fixed(v.std_error, digits); };
      std::snprintf(buf, sizeof buf, "%4d  %-22s %-18s %-18s %-18s\n", s.k, cellf(s.p_err, 5).c_str(),
                    cellf(s.s_hat, 4).c_str(), cellf(s.d2, 4).c_str(), cellf(s.d1, 4).c_str());
      os << buf;
    }
    if (c.variant == Variant::PolytopeStart) {
      std::snprintf(buf, sizeof buf, "%4s  %-22s %-18s %-18s %-18s\n", "th1", fixed(c.theory.p_err1, 5).c_str(),
                    fixed(0.0, 4).c_str(), fixed(c.theory.d2_pred, 4).c_str(), fixed(c.theory.d1_pred, 4).c_str());
      os << buf;
    }
    const auto& q = c.stats.q_matrix;
    if (q.rows() > 1) {
      os << "Q:\n";
      for (Eigen::Index a = 0; a < q.rows(); ++a) {
        os << "  ";
        for (Eigen::Index b = 0; b < q.cols(); ++b) os << (std::isnan(q(a, b)) ? std::string("   -  ") : fixed(q(a, b), 4)) << ' ';
        os << '\n';
      }
    }
    if (c.failures > 0) os << "failures: " << c.failures << '\n';
    os << '\n';
  }
  return os.str();
}

std::vector<std::filesystem::path> emit_outputs(const ExperimentResult& result) {
  const auto& dir = result.spec.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  auto write = [&](const char* name, const std::string& text) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
    written.push_back(path);
  };
  if (result.spec.emit.contains(Emit::Csv)) write("trials.csv", format_csv(result));
  if (result.spec.emit.contains(Emit::Json)) write("summary.json", format_json(result));
  if (result.spec.emit.contains(Emit::Table)) write("tables.txt", format_tables(result));
  return written;
}

}  // namespace clup::harness
