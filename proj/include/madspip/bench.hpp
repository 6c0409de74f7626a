// Batch runs over instance x mode matrices, history files, and data and
// feasibility profiles.
//
// Data profiles follow the usual constrained convention: an instance is
// tau-solved by group k when one of the first k*(n+1) evaluations is
// feasible with f <= f* + tau * (f_ref - f*). f* is the best feasible value
// any mode found on the instance (lowered to the known optimum when one is
// supplied); f_ref is f(x0) when x0 is feasible and otherwise the largest
// objective among the modes' first feasible evaluations. Instances where no
// mode ever finds a feasible point are dropped from data profiles.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "madspip/solver.hpp"
#include "madspip/suite.hpp"

namespace madspip {

struct InstanceKey {
  std::string problem;
  std::string x0_id;
  std::uint64_t seed = 0;
  Mode mode = Mode::pip;

  /// problem/x0_id/seed, shared by all modes of an instance.
  std::string instance() const;
  /// problem__x0_id__s<seed>__<mode>; also the history file stem.
  std::string str() const;

  auto operator<=>(const InstanceKey&) const = default;
};

/// Distinct blackbox evaluations of a run, in evaluation order.
struct TraceEval {
  std::int64_t eval_index = 0;
  double f = kInf;
  Eigen::VectorXd g;
  Eigen::VectorXd h;
  bool failed = false;
};

struct RunTrace {
  InstanceKey key;
  int n = 1;
  int m = 0;
  int p = 0;
  Outcome outcome = Outcome::running;
  std::optional<double> known_f_star;
  std::vector<TraceEval> evals;
};

RunTrace trace_of(const RunRecord& record, const InstanceKey& key,
                  std::optional<double> known_f_star = std::nullopt);

struct BenchRun {
  InstanceKey key;
  std::optional<double> known_f_star;
  RunRecord record;
};

/// One record per (instance, mode) not listed in `skip`, in input order.
/// Runs execute on a bounded worker pool; `on_done` is called serially as
/// each finishes. Run errors are kept in the record.
std::vector<BenchRun> run_matrix(const std::vector<Instance>& instances,
                                 const std::vector<Mode>& modes, std::int64_t budget,
                                 const SolverConfig& base = {}, unsigned workers = 0,
                                 const std::set<std::string>& skip = {},
                                 const std::function<void(const BenchRun&)>& on_done = {});

/// Header line + history rows.
void write_history(const std::filesystem::path& path, const BenchRun& run);

/// Parses a history file. Throws std::runtime_error on any malformed line.
RunTrace read_history(const std::filesystem::path& path);

/// Smallest k with a qualifying evaluation among the first k*(n+1); nullopt
/// when none qualifies. Throws std::invalid_argument when tau <= 0 or
/// f_ref < f_star.
std::optional<int> convergence_index(const RunTrace& run, double f_star, double f_ref,
                                     double tau, double eq_tol);

/// Smallest k with a feasible evaluation among the first k*(n+1).
std::optional<int> feasibility_index(const RunTrace& run, double eq_tol);

struct InstanceReference {
  double f_star = 0.0;
  double f_ref = 0.0;
};

/// f* and f_ref per instance (keyed by InstanceKey::instance()); instances
/// without any feasible evaluation are absent.
std::map<std::string, InstanceReference> reference_values(const std::vector<RunTrace>& runs,
                                                          double eq_tol);

struct ProfileCurve {
  std::vector<int> groups;
  std::vector<double> fraction;
  double tau = 0.0;  // 0 for feasibility profiles
  std::string label;
};

/// Largest number of evaluation groups used by any run.
int max_groups(const std::vector<RunTrace>& runs);

/// One curve per mode (sorted by label) over k = 0..groups.
/// Throws std::invalid_argument on an empty run set.
std::vector<ProfileCurve> data_profile(const std::vector<RunTrace>& runs, double tau,
                                       const std::map<std::string, InstanceReference>& refs,
                                       double eq_tol, std::optional<int> groups = {});
std::vector<ProfileCurve> data_profile(const std::vector<RunTrace>& runs, double tau,
                                       double eq_tol, std::optional<int> groups = {});

std::vector<ProfileCurve> feasibility_profile(const std::vector<RunTrace>& runs,
                                              double eq_tol, std::optional<int> groups = {});

enum class ExportFormat { csv, svg };

/// CSV columns label,tau,k,fraction; SVG step chart. Throws
/// std::invalid_argument on an empty list and std::runtime_error on I/O
/// failure.
void export_curves(const std::vector<ProfileCurve>& curves, ExportFormat format,
                   const std::filesystem::path& path);

std::vector<ProfileCurve> import_csv(const std::filesystem::path& path);

}  // namespace madspip
