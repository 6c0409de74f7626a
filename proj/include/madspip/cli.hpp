// Command-line front end: solve, bench, profile, list.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace madspip::cli {

struct CliConfig {
  std::string command;
  std::string problem;
  std::string x0;
  std::string x0_file;
  std::uint64_t seed = 1;
  std::string seeds = "1-10";
  std::int64_t budget = 1500;
  std::optional<std::string> mode;  // bench default: both modes
  std::string tau = "0.1,0.001";
  std::string out = "out";
  std::string eval_exe;
  int x0_count = 2;
  unsigned workers = 0;
  std::optional<double> b_rho;
  bool no_search = false;
  bool check_invariants = false;
};

/// Thrown for bad command lines; carries the exit status to use.
struct UsageError {
  int status;
  std::string message;
};

/// Parses argv (without the program name). Options given on the command
/// line override values from the --config file. Throws UsageError.
CliConfig parse_args(const std::vector<std::string>& args);

int cmd_solve(const CliConfig& config, std::ostream& out, std::ostream& err);
int cmd_bench(const CliConfig& config, std::ostream& out, std::ostream& err);
int cmd_profile(const CliConfig& config, std::ostream& out, std::ostream& err);
int cmd_list(const CliConfig& config, std::ostream& out, std::ostream& err);

/// Parse and dispatch. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "1-3,7" -> {1,2,3,7}. Throws std::invalid_argument.
std::vector<std::uint64_t> parse_seeds(const std::string& text);

/// "0.1,0.001" -> {0.1, 0.001}; "" or "none" -> {}.
std::vector<double> parse_taus(const std::string& text);

}  // namespace madspip::cli
