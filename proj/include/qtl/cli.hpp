#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qtl/common.hpp"
#include "qtl/experiment.hpp"
#include "qtl/verify.hpp"

namespace qtl::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kVerifyFailed = 2, kRuntime = 3 };

namespace detail {

// Values bound to CLI11; merged into an ExperimentConfig only when given.
struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  unsigned workers = 1;
  std::string shots, gammas, profile;
  unsigned n = 0;
  double p_edge = 0.0;
  std::size_t depth = 0, steps = 0, instances = 0, inits = 0;
  std::map<std::string, CLI::Option*> opts;

  void add_common(CLI::App* app) {
    opts["config"] = app->add_option("--config", config, "flat key=value config file");
    opts["seed"] = app->add_option("--seed", seed, "master seed");
    opts["out"] = app->add_option("--out", out, "output directory");
    opts["n"] = app->add_option("--n", n, "node count");
    opts["p-edge"] = app->add_option("--p-edge", p_edge, "Erdos-Renyi edge probability");
    opts["instances"] = app->add_option("--instances", instances, "graph instances");
  }

  void add_run(CLI::App* app) {
    add_common(app);
    opts["workers"] = app->add_option("--workers", workers, "worker threads");
    opts["shots"] = app->add_option("--shots", shots, "comma-separated shot budgets");
    opts["gammas"] = app->add_option("--gammas", gammas, "comma-separated tilt magnitudes");
    opts["depth"] = app->add_option("--depth", depth, "QAOA depth p");
    opts["steps"] = app->add_option("--steps", steps, "optimizer steps T");
    opts["inits"] = app->add_option("--inits", inits, "random initializations per instance");
    opts["profile"] = app->add_option("--profile", profile, "optimizer profile (default, alt1, alt2)");
  }

  bool given(const std::string& k) const {
    auto it = opts.find(k);
    return it != opts.end() && it->second->count() > 0;
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (given("config")) load_config_file(c, config);
    if (given("seed")) c.seed = seed;
    if (given("out")) c.out = out;
    if (given("n")) c.n = n;
    if (given("p-edge")) c.p_edge = p_edge;
    if (given("instances")) c.instances = instances;
    if (given("workers")) c.workers = workers;
    if (given("shots")) c.shots = qtl::detail::parse_list<std::size_t>(shots);
    if (given("gammas")) c.gammas = qtl::detail::parse_list<double>(gammas);
    if (given("depth")) c.depth = depth;
    if (given("steps")) c.steps = steps;
    if (given("inits")) c.inits = inits;
    if (given("profile")) c.profile = profile;
    return c;
  }
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

inline int run_experiment(const ExperimentConfig& c, std::ostream& out) {
  c.validate();
  c.master_seed();
  const auto graphs = read_instances(c.out, c.instances);
  const auto res = run_sweep(c, graphs);
  const std::string name = c.mode == ScheduleMode::Ascending ? "ascending" : "fixed";
  std::ostringstream csv, jsonl;
  write_rows_csv(csv, res.rows);
  for (const auto& [label, rec] : res.records) {
    jsonl << nlohmann::json{{"run", label}}.dump() << '\n';
    rec.write_jsonl(jsonl);
  }
  const auto dir = std::filesystem::path(c.out);
  write_file(dir / (name + ".csv"), csv.str());
  write_file(dir / (name + "_runs.jsonl"), jsonl.str());
  out << "wrote " << res.rows.size() << " rows to " << (dir / (name + ".csv")).string() << '\n';
  return kOk;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Tilted-loss QAOA experiments and verification suites", "qtl"};
  app.require_subcommand(1);

  detail::Flags gen_f, fixed_f, asc_f;
  auto* gen = app.add_subcommand("gen-graphs", "write Erdos-Renyi instances to <out>/graphs");
  gen_f.add_common(gen);
  auto* fixed = app.add_subcommand("run-fixed", "fixed-tilt sweep over the tilt grid");
  fixed_f.add_run(fixed);
  auto* asc = app.add_subcommand("run-ascending", "ascending-tilt sweep keyed by final tilt");
  asc_f.add_run(asc);

  std::vector<unsigned> bench_n = {2, 4, 8};
  std::string bench_gammas = "0,schedule";
  std::uint64_t bench_trials = 1000000, bench_seed = 0;
  unsigned bench_workers = 1;
  std::string bench_out;
  auto* bench = app.add_subcommand("benchmark-projector", "gradient-variance Monte Carlo on the projector benchmark");
  bench->add_option("--n", bench_n, "qubit counts")->delimiter(',');
  bench->add_option("--gammas", bench_gammas, "comma-separated tilts or 'schedule'");
  bench->add_option("--trials", bench_trials, "Monte Carlo trials per point");
  auto* bench_seed_opt = bench->add_option("--seed", bench_seed, "master seed");
  bench->add_option("--workers", bench_workers, "worker threads");
  bench->add_option("--out", bench_out, "output directory (stdout when omitted)");

  std::string suite;
  std::string verify_out;
  auto* ver = app.add_subcommand("verify", "run a named property suite");
  ver->add_option("suite", suite, "suite name or 'all'")->required();
  ver->add_option("--out", verify_out, "also write the JSON-lines report here");

  std::vector<std::string> agg_in;
  std::string agg_out;
  auto* agg = app.add_subcommand("aggregate", "two-level mean/SEM summary of result CSVs");
  agg->add_option("inputs", agg_in, "result CSV files")->required();
  agg->add_option("--out", agg_out, "summary CSV path (stdout when omitted)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      auto c = gen_f.resolve();
      c.validate();
      const auto graphs = generate_instances(c, &err);
      write_instances(c.out, graphs);
      out << "wrote " << graphs.size() << " graphs to " << (std::filesystem::path(c.out) / "graphs").string() << '\n';
      return kOk;
    }
    if (fixed->parsed()) {
      auto c = fixed_f.resolve();
      c.mode = ScheduleMode::Fixed;
      return detail::run_experiment(c, out);
    }
    if (asc->parsed()) {
      auto c = asc_f.resolve();
      c.mode = ScheduleMode::Ascending;
      return detail::run_experiment(c, out);
    }
    if (bench->parsed()) {
      if (bench_seed_opt->count() == 0) throw InputError("--seed is required");
      std::vector<std::string> gs;
      std::stringstream ss(bench_gammas);
      for (std::string g; std::getline(ss, g, ',');)
        if (!g.empty()) gs.push_back(g);
      const auto rows = benchmark_projector(bench_n, gs, bench_trials, bench_seed, bench_workers);
      std::ostringstream csv;
      write_benchmark_csv(csv, rows);
      if (bench_out.empty()) out << csv.str();
      else detail::write_file(std::filesystem::path(bench_out) / "benchmark_projector.csv", csv.str());
      return kOk;
    }
    if (ver->parsed()) {
      const auto& table = verify::suites();
      SuiteReport report;
      if (suite == "all") {
        for (const auto& [name, fn] : table) {
          auto r = fn();
          report.insert(report.end(), r.begin(), r.end());
        }
      } else {
        auto it = table.find(suite);
        if (it == table.end()) {
          err << "unknown suite '" << suite << "'; available:";
          for (const auto& [name, _] : table) err << ' ' << name;
          err << " all\n";
          return kUsage;
        }
        report = it->second();
      }
      std::ostringstream text;
      write_report(text, report);
      out << text.str();
      if (!verify_out.empty()) detail::write_file(verify_out, text.str());
      return all_passed(report) ? kOk : kVerifyFailed;
    }
    if (agg->parsed()) {
      std::vector<ResultRow> rows;
      for (const auto& p : agg_in) {
        std::ifstream f(p);
        if (!f) throw InputError("cannot open " + p);
        auto r = read_rows_csv(f);
        rows.insert(rows.end(), r.begin(), r.end());
      }
      std::ostringstream csv;
      write_summary_csv(csv, aggregate(rows, &err));
      if (agg_out.empty()) out << csv.str();
      else detail::write_file(agg_out, csv.str());
      return kOk;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace qtl::cli
