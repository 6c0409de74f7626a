#include "madspip/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "madspip/bench.hpp"
#include "madspip/solver.hpp"
#include "madspip/suite.hpp"

namespace madspip::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

Eigen::VectorXd read_x0_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open x0 file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  std::replace_if(text.begin(), text.end(), [](char c) { return std::isspace((unsigned char)c); }, ',');
  std::string joined;
  for (const std::string& s : split(text, ',')) joined += (joined.empty() ? "" : ",") + s;
  return parse_vector(joined);
}

SolverConfig solver_config(const CliConfig& c) {
  SolverConfig s;
  s.max_evaluations = c.budget;
  s.seed = c.seed;
  s.search_enabled = !c.no_search;
  s.invariant_checks = c.check_invariants;
  if (c.b_rho) s.merit.b_rho = *c.b_rho;
  return s;
}

std::vector<Mode> bench_modes(const CliConfig& c) {
  if (!c.mode) return {Mode::pip, Mode::extreme_barrier};
  std::vector<Mode> modes;
  for (const std::string& m : split(*c.mode, ',')) modes.push_back(mode_from_string(m));
  if (modes.empty()) throw std::invalid_argument("empty mode list");
  return modes;
}

std::string tau_tag(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", tau);
  return buf;
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& part : split(text, ',')) {
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(part));
      } else {
        const std::uint64_t lo = std::stoull(part.substr(0, dash));
        const std::uint64_t hi = std::stoull(part.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument("descending range");
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const std::exception&) {
      throw std::invalid_argument("bad seed list entry '" + part + "'");
    }
  }
  return seeds;
}

std::vector<double> parse_taus(const std::string& text) {
  if (text.empty() || text == "none") return {};
  std::vector<double> taus;
  for (const std::string& part : split(text, ',')) {
    const double tau = std::stod(part);
    if (!(tau > 0)) throw std::invalid_argument("tau must be positive");
    taus.push_back(tau);
  }
  return taus;
}

CliConfig parse_args(const std::vector<std::string>& args) {
  CliConfig c;
  CLI::App app{"Mesh adaptive direct search with a penalty-interior-point merit function",
               "madspip"};
  app.set_config("--config", "", "flat key = value file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("command", c.command, "solve | bench | profile | list")
      ->required()
      ->check(CLI::IsMember({"solve", "bench", "profile", "list"}));
  app.add_option("--problem", c.problem,
                 "builtin name (see list) or problem definition file; bench takes a comma list");
  app.add_option("--x0", c.x0, "builtin x0 id (feas-0, infeas-0, ...) or literal vector 0.1,0.2");
  app.add_option("--x0-file", c.x0_file, "file holding the starting point");
  app.add_option("--seed", c.seed, "random seed for solve");
  app.add_option("--seeds", c.seeds, "seed list for bench, e.g. 1-10 or 1,4,9");
  app.add_option("--budget", c.budget, "blackbox evaluation budget")->check(CLI::PositiveNumber);
  app.add_option("--mode", c.mode, "pip | extreme-barrier (bench: comma list)");
  app.add_option("--tau", c.tau, "data profile precisions, comma list or none");
  app.add_option("--out", c.out, "output directory (profile reads histories from it)");
  app.add_option("--eval-exe", c.eval_exe, "external blackbox executable");
  app.add_option("--x0-count", c.x0_count, "initial points per problem for bench")
      ->check(CLI::PositiveNumber);
  app.add_option("--workers", c.workers, "bench worker threads (0: hardware concurrency)");
  app.add_option("--b-rho", c.b_rho, "penalty update constant (textbook value 10)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--no-search", c.no_search, "disable the speculative search step");
  app.add_flag("--check-invariants", c.check_invariants, "replay run invariants after each run");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw UsageError{0, app.help()};
  } catch (const CLI::ParseError& e) {
    throw UsageError{2, std::string(e.what()) + "\n" + app.help()};
  }
  return c;
}

int cmd_solve(const CliConfig& c, std::ostream& out, std::ostream& err) {
  std::optional<Problem> problem;
  std::optional<KnownOptimum> optimum;
  std::optional<BuiltinProblem> builtin;
  std::optional<Eigen::VectorXd> file_x0;
  try {
    if (c.problem.empty()) throw std::invalid_argument("--problem is required");
    if (fs::is_regular_file(c.problem)) {
      ProblemFile pf = load_problem_file(c.problem);
      if (!c.eval_exe.empty()) {
        pf.problem.evaluator = external_evaluator(c.eval_exe, pf.problem.m, pf.problem.p, pf.timeout);
      }
      problem = std::move(pf.problem);
      file_x0 = pf.x0;
    } else if ((builtin = find_builtin(c.problem))) {
      if (!c.eval_exe.empty()) {
        throw std::invalid_argument("--eval-exe needs a problem definition file");
      }
      problem = builtin->problem;
      optimum = builtin->optimum;
    } else {
      throw std::invalid_argument("unknown problem '" + c.problem + "'");
    }
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  }

  std::string x0_id = "custom";
  Eigen::VectorXd x0;
  try {
    if (!c.x0_file.empty()) {
      x0 = read_x0_file(c.x0_file);
    } else if (!c.x0.empty() && (c.x0.rfind("feas-", 0) == 0 || c.x0.rfind("infeas-", 0) == 0)) {
      if (!builtin) throw std::invalid_argument("x0 ids apply to builtin problems only");
      x0_id = c.x0;
      x0 = builtin_x0(*builtin, x0_id);
    } else if (!c.x0.empty()) {
      x0 = parse_vector(c.x0);
    } else if (builtin) {
      x0_id = "feas-0";
      x0 = builtin_x0(*builtin, x0_id);
    } else if (file_x0) {
      x0 = *file_x0;
    } else {
      throw std::invalid_argument("no starting point given");
    }
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  }

  SolverConfig config = solver_config(c);
  try {
    config.mode = mode_from_string(c.mode.value_or("pip"));
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  }

  BenchRun run;
  run.key = InstanceKey{problem->name, x0_id, c.seed, config.mode};
  if (optimum) run.known_f_star = optimum->f_star;
  run.record = solve(*problem, x0, config);
  if (run.record.outcome == Outcome::error) {
    err << "error: " << run.record.error << "\n";
    return 2;
  }
  try {
    fs::create_directories(c.out);
    write_history(fs::path(c.out) / (run.key.str() + ".jsonl"), run);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }
  out << summary_line(run.record) << "\n";
  if (c.check_invariants) {
    for (const std::string& v : run.record.invariants.violations) err << "invariant: " << v << "\n";
    for (const std::string& w : run.record.invariants.warnings) err << "note: " << w << "\n";
  }
  return 0;
}

int cmd_bench(const CliConfig& c, std::ostream& out, std::ostream& err) {
  std::vector<BuiltinProblem> problems;
  std::vector<std::uint64_t> seeds;
  std::vector<Mode> modes;
  try {
    if (c.problem.empty()) {
      problems = builtin_problems();
    } else {
      for (const std::string& name : split(c.problem, ',')) {
        auto b = find_builtin(name);
        if (!b) throw std::invalid_argument("unknown problem '" + name + "'");
        problems.push_back(std::move(*b));
      }
    }
    seeds = parse_seeds(c.seeds);
    if (seeds.empty()) throw std::invalid_argument("empty seed list");
    modes = bench_modes(c);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  }

  const fs::path dir = c.out;
  const fs::path manifest = dir / "manifest.txt";
  std::set<std::string> done;
  try {
    fs::create_directories(dir);
    std::ifstream in(manifest);
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) done.insert(line);
    }
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }

  const std::vector<Instance> instances = make_instances(problems, c.x0_count, seeds);
  std::ofstream manifest_out(manifest, std::ios::app);
  std::size_t completed = 0;
  std::size_t errors = 0;
  const std::set<std::string> skip = done;
  auto runs = run_matrix(instances, modes, c.budget, solver_config(c), c.workers, skip,
                         [&](const BenchRun& run) {
                           write_history(dir / (run.key.str() + ".jsonl"), run);
                           manifest_out << run.key.str() << "\n" << std::flush;
                           done.insert(run.key.str());
                           if (run.record.outcome == Outcome::error) {
                             ++errors;
                             err << "run " << run.key.str() << " failed: " << run.record.error
                                 << "\n";
                           } else {
                             ++completed;
                           }
                         });
  manifest_out.close();
  {
    std::ofstream rewrite(manifest, std::ios::trunc);
    for (const std::string& key : done) rewrite << key << "\n";
  }
  out << "bench: " << runs.size() << " runs (" << completed << " completed, " << errors
      << " errors, " << skip.size() << " previously done) in " << dir.string() << "\n";
  if (completed == 0 && !runs.empty()) return 1;
  return 0;
}

int cmd_profile(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const fs::path dir = c.out;
  std::vector<double> taus;
  try {
    taus = parse_taus(c.tau);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  }
  if (!fs::is_directory(dir)) {
    err << "error: no history directory " << dir.string() << "\n";
    return 2;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<RunTrace> runs;
  for (const fs::path& f : files) {
    try {
      runs.push_back(read_history(f));
    } catch (const std::exception& ex) {
      err << "warning: skipping " << f.filename().string() << ": " << ex.what() << "\n";
    }
  }
  if (runs.empty()) {
    err << "error: no histories found in " << dir.string() << "\n";
    return 2;
  }

  constexpr double eq_tol = 1e-8;
  std::vector<fs::path> written;
  auto emit = [&](const std::vector<ProfileCurve>& curves, const std::string& stem) {
    for (auto [format, ext] : {std::pair{ExportFormat::csv, ".csv"}, std::pair{ExportFormat::svg, ".svg"}}) {
      const fs::path path = dir / (stem + ext);
      export_curves(curves, format, path);
      written.push_back(path);
    }
  };
  try {
    const auto refs = reference_values(runs, eq_tol);
    const int groups = max_groups(runs);
    for (double tau : taus) {
      emit(data_profile(runs, tau, refs, eq_tol, groups), "data_profile_tau" + tau_tag(tau));
    }
    emit(feasibility_profile(runs, eq_tol, groups), "feasibility_profile");
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }
  for (const fs::path& p : written) out << p.string() << "\n";
  out << "profile: " << runs.size() << " runs, " << written.size() << " files\n";
  return 0;
}

int cmd_list(const CliConfig&, std::ostream& out, std::ostream&) {
  for (const BuiltinProblem& b : builtin_problems()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s n=%d m=%d p=%d f*=%.10g", b.problem.name.c_str(),
                  b.problem.n, b.problem.m, b.problem.p, b.optimum.f_star);
    out << buf << "\n";
  }
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig c;
  try {
    c = parse_args(args);
  } catch (const UsageError& u) {
    (u.status == 0 ? out : err) << u.message;
    return u.status;
  }
  if (c.command == "solve") return cmd_solve(c, out, err);
  if (c.command == "bench") return cmd_bench(c, out, err);
  if (c.command == "profile") return cmd_profile(c, out, err);
  return cmd_list(c, out, err);
}

}  // namespace madspip::cli
