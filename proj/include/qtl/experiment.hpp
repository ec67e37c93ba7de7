#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "qtl/common.hpp"
#include "qtl/estimators.hpp"
#include "qtl/optimizer.hpp"
#include "qtl/projector_benchmark.hpp"
#include "qtl/rng.hpp"
#include "qtl/spectra.hpp"
#include "qtl/statevector.hpp"

namespace qtl {

inline constexpr const char* kResultsHeader = "# qtl-results v1";
inline constexpr const char* kSummaryHeader = "# qtl-summary v1";
inline constexpr const char* kBenchmarkHeader = "# qtl-benchmark v1";

enum class ScheduleMode { Fixed, Ascending };

struct ExperimentConfig {
  unsigned n = 8;
  double p_edge = 0.43;
  std::size_t depth = 2;
  std::size_t instances = 3;
  std::size_t inits = 3;
  std::vector<std::size_t> shots = {5000};
  std::vector<double> gammas = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
  ScheduleMode mode = ScheduleMode::Fixed;
  std::string profile = "default";
  std::size_t steps = 100;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  unsigned workers = 1;

  void validate() const {
    if (n < 1 || n > kBruteForceLimit) throw InputError("n must lie in [1, 24]");
    if (!(p_edge >= 0.0 && p_edge <= 1.0)) throw InputError("p_edge must lie in [0, 1]");
    if (depth < 1) throw InputError("depth must be at least 1");
    if (instances < 1 || inits < 1) throw InputError("instances and inits must be positive");
    if (shots.empty()) throw InputError("shot list is empty");
    for (auto s : shots)
      if (s < 1) throw InputError("shot budgets must be positive");
    if (gammas.empty()) throw InputError("tilt grid is empty");
    for (double g : gammas)
      if (!(g >= 0.0) || !std::isfinite(g)) throw InputError("tilt grid values are magnitudes and must be >= 0");
    if (workers < 1) throw InputError("workers must be positive");
  }

  std::uint64_t master_seed() const {
    if (!seed) throw InputError("--seed is required");
    return *seed;
  }
};

// ---------------------------------------------------------------------------
// Flat key=value config files
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw InputError("bad list entry: " + item);
    out.push_back(v);
  }
  return out;
}

template <class T>
T parse_scalar(const std::string& key, const std::string& s) {
  std::istringstream is(s);
  T v{};
  if (!(is >> v) || !is.eof()) throw InputError("bad value for " + key + ": " + s);
  return v;
}

}  // namespace detail

/// Keys: n, p_edge, depth, instances, inits, shots, gammas, schedule
/// (fixed|ascending), profile, steps, seed, out, workers. '#' starts a comment.
inline void apply_config_text(ExperimentConfig& c, std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("config line " + std::to_string(lineno) + " lacks '='");
    const std::string key = detail::trim(line.substr(0, eq)), val = detail::trim(line.substr(eq + 1));
    if (key == "n") c.n = detail::parse_scalar<unsigned>(key, val);
    else if (key == "p_edge") c.p_edge = detail::parse_scalar<double>(key, val);
    else if (key == "depth") c.depth = detail::parse_scalar<std::size_t>(key, val);
    else if (key == "instances") c.instances = detail::parse_scalar<std::size_t>(key, val);
    else if (key == "inits") c.inits = detail::parse_scalar<std::size_t>(key, val);
    else if (key == "shots") c.shots = detail::parse_list<std::size_t>(val);
    else if (key == "gammas") c.gammas = detail::parse_list<double>(val);
    else if (key == "schedule") {
      if (val == "fixed") c.mode = ScheduleMode::Fixed;
      else if (val == "ascending") c.mode = ScheduleMode::Ascending;
      else throw InputError("schedule must be fixed or ascending");
    } else if (key == "profile") c.profile = val;
    else if (key == "steps") c.steps = detail::parse_scalar<std::size_t>(key, val);
    else if (key == "seed") c.seed = detail::parse_scalar<std::uint64_t>(key, val);
    else if (key == "out") c.out = val;
    else if (key == "workers") c.workers = detail::parse_scalar<unsigned>(key, val);
    else throw InputError("unknown config key: " + key);
  }
}

inline void load_config_file(ExperimentConfig& c, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open config " + path);
  apply_config_text(c, f);
}

// ---------------------------------------------------------------------------
// Graph ensembles
// ---------------------------------------------------------------------------

enum class ExperimentStream : std::uint64_t { Graph = 11, Init = 12, Run = 13, Final = 14 };

/// Instance i uses derive_seed(master, {Graph, i, attempt}); edgeless draws
/// are rejected and the attempt counter advances.
inline std::vector<Graph> generate_instances(const ExperimentConfig& c, std::ostream* log = nullptr) {
  const auto master = c.master_seed();
  std::vector<Graph> out;
  for (std::size_t i = 0; i < c.instances; ++i) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt > 1000) throw DomainError("could not draw a graph with edges; raise p_edge");
      Graph g = erdos_renyi(c.n, c.p_edge, derive_seed(master, {static_cast<std::uint64_t>(ExperimentStream::Graph), i, attempt}));
      if (!g.edges().empty()) {
        out.push_back(std::move(g));
        break;
      }
      if (log) *log << "instance " << i << ": edgeless draw at attempt " << attempt << ", regenerating\n";
    }
  }
  return out;
}

inline std::filesystem::path graph_path(const std::string& dir, std::size_t i) {
  return std::filesystem::path(dir) / "graphs" / ("graph_" + std::to_string(i) + ".txt");
}

inline void write_instances(const std::string& dir, const std::vector<Graph>& graphs) {
  std::filesystem::create_directories(std::filesystem::path(dir) / "graphs");
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    std::ofstream f(graph_path(dir, i));
    if (!f) throw std::runtime_error("cannot write " + graph_path(dir, i).string());
    write_graph(f, graphs[i]);
  }
}

inline std::vector<Graph> read_instances(const std::string& dir, std::size_t count) {
  std::vector<Graph> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::ifstream f(graph_path(dir, i));
    if (!f) throw InputError("missing graph file " + graph_path(dir, i).string() + " (run gen-graphs first)");
    out.push_back(read_graph(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct ResultRow {
  std::string experiment;
  double gamma = 0.0;  // magnitude; the loss uses -gamma
  std::size_t shots = 0;
  std::size_t instance = 0;
  std::size_t init = 0;
  double final_cut = 0.0;
  double c_max = 0.0;
  double mfr = 0.0;
  std::string status = "ok";

  auto key() const { return std::tie(experiment, gamma, shots, instance, init); }
};

struct SweepOutput {
  std::vector<ResultRow> rows;
  std::vector<std::pair<std::string, RunRecord>> records;  // label, record
};

/// Initial angles in [0, 2pi) for (instance, init); shared by every tilt and
/// budget so the comparison across tilts is paired.
inline std::vector<double> initial_params(std::uint64_t master, std::size_t instance, std::size_t init, std::size_t count) {
  Xoshiro256 rng(derive_seed(master, {static_cast<std::uint64_t>(ExperimentStream::Init), instance, init}));
  std::vector<double> x(count);
  for (auto& v : x) v = rng.uniform(0.0, kTwoPi);
  return x;
}

/// One optimization plus the final-cut estimate. The run and final-sample
/// seeds depend on (instance, init, shots) only, so fixed and ascending runs
/// at the same key see the same randomness.
inline std::pair<ResultRow, RunRecord> run_row(const ExperimentConfig& c, const Graph& g, const MaxCutResult& best,
                                               std::size_t gi, std::size_t instance, std::size_t init, std::size_t shots) {
  const auto master = c.master_seed();
  const double mag = c.gammas[gi];
  const bool asc = c.mode == ScheduleMode::Ascending;
  ResultRow row{asc ? "ascending" : "fixed", mag, shots, instance, init};
  row.c_max = best.max_cut;
  OptimizerConfig oc = optimizer_profile(c.profile);
  if (asc) oc = ascending_variant(oc);
  oc.steps = c.steps;
  oc.shots_per_eval = shots;
  const QaoaObjective obj(maxcut_hamiltonian(g), c.depth, shots);
  const TiltSchedule sched = asc ? TiltSchedule(LinearAscendingTilt{0.0, 0.0 - mag}) : TiltSchedule(FixedTilt{0.0 - mag});
  const auto run_seed = derive_seed(master, {static_cast<std::uint64_t>(ExperimentStream::Run), instance, init, shots});
  RunRecord rec = run_optimization(obj, initial_params(master, instance, init, obj.parameter_count()), oc, sched, run_seed);
  if (best.max_cut == 0) {
    row.status = "domain_error";
    row.mfr = std::nan("");
    return {row, rec};
  }
  const auto state = obj.state(rec.final_params);
  const auto fin = derive_seed(master, {static_cast<std::uint64_t>(ExperimentStream::Final), instance, init, shots});
  const auto z = sample_bitstrings(state, shots, fin);
  double sum = 0.0, sum2 = 0.0;
  for (auto zi : z) {
    const double cut = cut_value(g, zi);
    sum += cut;
    sum2 += cut * cut;
  }
  const double k = static_cast<double>(z.size());
  row.final_cut = sum / k;
  row.mfr = row.final_cut / row.c_max;
  const double sd = std::sqrt(std::max(0.0, sum2 / k - row.final_cut * row.final_cut));
  if (row.mfr > 1.0 + 3.0 * sd / std::sqrt(k) / row.c_max) row.status = "mfr_above_one";
  return {row, rec};
}

/// Runs every (gamma, shots, instance, init) tuple on a bounded pool; rows
/// come back sorted by key regardless of the worker count.
inline SweepOutput run_sweep(const ExperimentConfig& c, const std::vector<Graph>& graphs) {
  c.validate();
  std::vector<MaxCutResult> best;
  for (const auto& g : graphs) best.push_back(brute_force_maxcut(g));
  struct Task {
    std::size_t gi, si, inst, init;
  };
  std::vector<Task> tasks;
  for (std::size_t gi = 0; gi < c.gammas.size(); ++gi)
    for (std::size_t si = 0; si < c.shots.size(); ++si)
      for (std::size_t inst = 0; inst < graphs.size(); ++inst)
        for (std::size_t init = 0; init < c.inits; ++init) tasks.push_back({gi, si, inst, init});
  std::vector<std::optional<std::pair<ResultRow, RunRecord>>> results(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
      const auto& tk = tasks[t];
      try {
        results[t] = run_row(c, graphs[tk.inst], best[tk.inst], tk.gi, tk.inst, tk.init, c.shots[tk.si]);
      } catch (const std::exception& e) {
        errors[t] = e.what();
      }
    }
  };
  const unsigned w = std::max(1u, std::min<unsigned>(c.workers, static_cast<unsigned>(tasks.size())));
  if (w == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < w; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  SweepOutput out;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& tk = tasks[t];
    if (results[t]) {
      out.rows.push_back(results[t]->first);
      std::ostringstream label;
      label << out.rows.back().experiment << " gamma=" << c.gammas[tk.gi] << " shots=" << c.shots[tk.si]
            << " instance=" << tk.inst << " init=" << tk.init;
      out.records.emplace_back(label.str(), std::move(results[t]->second));
    } else {
      ResultRow r{c.mode == ScheduleMode::Ascending ? "ascending" : "fixed", c.gammas[tk.gi], c.shots[tk.si], tk.inst, tk.init};
      r.c_max = best[tk.inst].max_cut;
      r.mfr = std::nan("");
      r.status = "runtime_error";
      out.rows.push_back(r);
    }
  }
  std::vector<std::size_t> order(out.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return out.rows[a].key() < out.rows[b].key(); });
  SweepOutput sorted;
  for (auto i : order) {
    sorted.rows.push_back(out.rows[i]);
    sorted.records.push_back(std::move(out.records[i]));
  }
  return sorted;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_rows_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kResultsHeader << '\n' << "experiment,gamma,shots,instance,init,final_cut,c_max,mfr,status\n";
  for (const auto& r : rows)
    os << r.experiment << ',' << fmt_double(r.gamma) << ',' << r.shots << ',' << r.instance << ',' << r.init << ','
       << fmt_double(r.final_cut) << ',' << fmt_double(r.c_max) << ',' << fmt_double(r.mfr) << ',' << r.status << '\n';
}

inline std::vector<ResultRow> read_rows_csv(std::istream& is) {
  std::vector<ResultRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("experiment,", 0) != 0) throw InputError("results CSV lacks its column header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw InputError("results row needs 9 columns: " + line);
    ResultRow r;
    r.experiment = f[0];
    r.gamma = std::stod(f[1]);
    r.shots = std::stoull(f[2]);
    r.instance = std::stoull(f[3]);
    r.init = std::stoull(f[4]);
    r.final_cut = std::stod(f[5]);
    r.c_max = std::stod(f[6]);
    r.mfr = f[7] == "nan" ? std::nan("") : std::stod(f[7]);
    r.status = f[8];
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct SummaryRow {
  std::string experiment;
  double gamma = 0.0;
  std::size_t shots = 0;
  std::size_t instances = 0;
  double mean_mfr = 0.0;
  double sem = 0.0;
  bool degenerate = false;  // a single instance: SEM undefined, reported as 0
};

/// Mean over inits within each instance, then mean and SEM across
/// instances, per (experiment, gamma, shots). Rows that are not "ok" or
/// "mfr_above_one" are skipped; groups left empty are dropped with a warning.
inline std::vector<SummaryRow> aggregate(const std::vector<ResultRow>& rows, std::ostream* warn = nullptr) {
  using GroupKey = std::tuple<std::string, double, std::size_t>;
  std::map<GroupKey, std::map<std::size_t, std::pair<double, std::size_t>>> groups;
  std::map<GroupKey, bool> seen;
  for (const auto& r : rows) {
    GroupKey k{r.experiment, r.gamma, r.shots};
    seen[k] = true;
    if ((r.status != "ok" && r.status != "mfr_above_one") || std::isnan(r.mfr)) continue;
    auto& cell = groups[k][r.instance];
    cell.first += r.mfr;
    cell.second += 1;
  }
  std::vector<SummaryRow> out;
  for (const auto& [k, _] : seen) {
    auto it = groups.find(k);
    if (it == groups.end()) {
      if (warn) *warn << "warning: group " << std::get<0>(k) << " gamma=" << std::get<1>(k) << " shots=" << std::get<2>(k)
                      << " has no usable rows; omitted\n";
      continue;
    }
    std::vector<double> per;
    for (const auto& [inst, cell] : it->second) per.push_back(cell.first / static_cast<double>(cell.second));
    SummaryRow s{std::get<0>(k), std::get<1>(k), std::get<2>(k), per.size()};
    double mean = 0.0;
    for (double v : per) mean += v;
    mean /= static_cast<double>(per.size());
    s.mean_mfr = mean;
    if (per.size() < 2) {
      s.degenerate = true;
    } else {
      double ss = 0.0;
      for (double v : per) ss += (v - mean) * (v - mean);
      s.sem = std::sqrt(ss / static_cast<double>(per.size() - 1) / static_cast<double>(per.size()));
    }
    out.push_back(s);
  }
  return out;
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << kSummaryHeader << '\n' << "experiment,gamma,shots,instances,mean_mfr,sem,degenerate\n";
  for (const auto& s : rows)
    os << s.experiment << ',' << fmt_double(s.gamma) << ',' << s.shots << ',' << s.instances << ','
       << fmt_double(s.mean_mfr) << ',' << fmt_double(s.sem) << ',' << (s.degenerate ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Projector benchmark
// ---------------------------------------------------------------------------

struct BenchmarkRow {
  unsigned n = 0;
  double gamma = 0.0;
  std::uint64_t trials = 0;
  double var_estimate = 0.0;
  double std_err = 0.0;
  double reference = 0.0;  // (1/8)(3/8)^{n-1} at gamma = 0, the lower bound for gamma < 0, nan otherwise
};

/// `gammas` entries are numbers or the word "schedule" for 2(n-1)log(3/8).
inline std::vector<BenchmarkRow> benchmark_projector(const std::vector<unsigned>& ns, const std::vector<std::string>& gammas,
                                                     std::uint64_t trials, std::uint64_t seed, unsigned workers) {
  std::vector<BenchmarkRow> out;
  for (std::size_t ni = 0; ni < ns.size(); ++ni) {
    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
      const unsigned n = ns[ni];
      const double g = gammas[gi] == "schedule" ? schedule_gamma(n) : detail::parse_scalar<double>("gamma", gammas[gi]);
      const auto v = gradient_variance_mc(n, g, trials, derive_seed(seed, {n, gi}), workers);
      double ref = std::nan("");
      if (is_zero_tilt(g)) ref = analytic_variance_gamma0(n);
      else if (g < 0) ref = variance_lower_bound(n, g);
      out.push_back({n, g, trials, v.variance, v.std_error, ref});
    }
  }
  return out;
}

inline void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows) {
  os << kBenchmarkHeader << '\n' << "n,gamma,trials,var_estimate,std_err,analytic_value_or_bound\n";
  for (const auto& r : rows)
    os << r.n << ',' << fmt_double(r.gamma) << ',' << r.trials << ',' << fmt_double(r.var_estimate) << ','
       << fmt_double(r.std_err) << ',' << fmt_double(r.reference) << '\n';
}

}  // namespace qtl
