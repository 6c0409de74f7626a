// Built-in analytic test problems with provable optima, instance generation,
// and plain-text problem definition files for external blackboxes.
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "madspip/problem.hpp"

namespace madspip {

struct KnownOptimum {
  double f_star = 0.0;
  Eigen::VectorXd x_star;
  std::string tolerance_note;
};

struct BuiltinProblem {
  Problem problem;
  KnownOptimum optimum;
  // Strictly feasible (or, with equalities, feasible to rounding) sample.
  std::function<Eigen::VectorXd(std::mt19937_64&)> sample_feasible;
  // Reflection of a feasible point across a constraint boundary.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> make_infeasible;
};

/// unit-disk, sphere-eq-3, sphere-eq-5, mixed-kkt, maxabs-lin, two-ring.
std::vector<BuiltinProblem> builtin_problems();

/// Case-insensitive lookup; nullopt for unknown names.
std::optional<BuiltinProblem> find_builtin(const std::string& name);

struct Instance {
  std::shared_ptr<const Problem> problem;
  std::optional<KnownOptimum> optimum;
  std::string x0_id;
  Eigen::VectorXd x0;
  std::uint64_t seed = 0;
};

/// Initial point `x0_id` of a builtin problem: "feas-j" or "infeas-j".
/// Deterministic in (problem name, x0_id). Throws std::invalid_argument on a
/// malformed id.
Eigen::VectorXd builtin_x0(const BuiltinProblem& problem, const std::string& x0_id);

/// The x0 ids used for `count` initial points: feas-0, infeas-0, feas-1, ...
std::vector<std::string> x0_ids(int count);

/// problems x initial points x seeds. Throws std::invalid_argument when seeds
/// is empty.
std::vector<Instance> make_instances(const std::vector<BuiltinProblem>& problems,
                                     int x0_per_problem,
                                     const std::vector<std::uint64_t>& seeds);

/// FNV-1a; stable across platforms, used to seed per-problem generators.
std::uint64_t stable_hash(const std::string& text);

/// Problem definition read from a flat `key = value` file:
///   name, n, m, p, lower, upper (comma lists), evaluator (path, relative
///   to the file), timeout (seconds), x0 (comma list, optional).
struct ProblemFile {
  Problem problem;
  std::filesystem::path evaluator_path;
  std::chrono::milliseconds timeout{10000};
  std::optional<Eigen::VectorXd> x0;
};

ProblemFile load_problem_file(const std::filesystem::path& path);

/// "1,2.5,-3" -> vector. Throws std::invalid_argument.
Eigen::VectorXd parse_vector(const std::string& text);

}  // namespace madspip
