// MADS with penalty-interior-point merit (MADS-PIP), and an extreme-barrier
// MADS baseline sharing the same loop.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "madspip/merit.hpp"
#include "madspip/mesh.hpp"
#include "madspip/problem.hpp"

namespace madspip {

enum class Mode { pip, extreme_barrier };

const char* to_string(Mode mode);
Mode mode_from_string(const std::string& text);

enum class Outcome { running, budget_exhausted, delta_converged, rho_converged, error };

const char* to_string(Outcome outcome);
Outcome outcome_from_string(const std::string& text);

/// Thrown when a run cannot start (bad x0, failed first evaluation, ...).
class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  std::int64_t max_evaluations = 1000;
  double delta_stop = 1e-9;
  double rho0 = 1e-1;
  double rho_stop = 1e-12;
  double eps_ext = 1e-14;
  double eq_tol = 1e-8;
  std::uint64_t seed = 0;
  bool search_enabled = true;
  Mode mode = Mode::pip;
  bool invariant_checks = false;
  // Initial frame size. Unset: geometric mean of (upper - lower) / 10 when
  // bounds exist, otherwise 1.
  std::optional<double> delta0;
  double theta_delta = 0.5;
  // Scaling and update constants. rho and b_ext are set at initialization.
  MeritParams merit;

  void validate() const;
};

/// Per-iteration trace used to replay the run-level invariants.
struct IterationLog {
  std::int64_t iteration = 0;
  bool successful = false;
  bool by_search = false;
  MeritParams params;  // in force during the iteration
  std::int64_t partition_version = 0;
  double merit_start = kInf;
  double best_candidate_merit = kInf;
  double incumbent_cint = -1.0;
  double phi_prox = -kInf;
  bool has_interior = false;
  double delta_frame = 0.0;
  double delta_next = 0.0;
  bool rho_reduced = false;
  bool partition_changed = false;
  std::vector<double> frame_cint;  // c_int of every poll point evaluated
};

struct InvariantReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;  // asymptotic checks, logged only

  bool ok() const { return violations.empty(); }
};

struct RunRecord {
  std::string problem;
  int n = 0;
  int m = 0;
  int p = 0;
  Mode mode = Mode::pip;
  std::uint64_t seed = 0;

  std::vector<HistoryRow> rows;
  std::vector<std::pair<std::int64_t, double>> rho_trace;  // (iteration, rho)
  std::vector<std::pair<std::int64_t, std::size_t>> partition_trace;  // moved index
  std::vector<IterationLog> iterations;
  Partition initial_partition;
  double theta_rho = 1e-2;

  Outcome outcome = Outcome::running;
  std::string error;
  bool reselect_flagged = false;

  std::int64_t evaluations = 0;
  std::optional<double> best_feasible_f;
  double final_rho = 0.0;
  double final_delta = 0.0;

  InvariantReport invariants;

  /// One JSON object per line, rows only.
  std::string history_jsonl() const;
};

/// Mutable state of one run. Holds a pointer to the problem, which must
/// outlive the state.
struct SolverState {
  const Problem* problem = nullptr;
  SolverConfig config;
  Lattice lattice;
  MeshState mesh;
  Partition partition;
  MeritParams params;
  Cache cache;
  DirectionGenerator directions{0};
  std::size_t incumbent = 0;  // index into cache.entries()
  std::int64_t iteration = 0;
  std::int64_t partition_version = 0;
  std::optional<Lattice::Offset> last_success;
  RunRecord record;

  const Evaluation& incumbent_eval() const { return cache.entries()[incumbent]; }
  const Lattice::Offset& incumbent_offset() const { return cache.key(incumbent); }

  /// Merit of an evaluation under the current mode, partition and params.
  double merit_of(const Evaluation& e) const;
  ViolationSummary violations_of(const Evaluation& e) const;

  /// Stopping test; sets record.outcome when a criterion holds.
  bool should_stop();
};

struct Candidate {
  Lattice::Offset offset;
  Eigen::VectorXd point;
};

enum class IterationResult { successful, unsuccessful, stopped };

/// Evaluates x0, sets up the partition, scalings and mesh. Throws
/// InitializationError.
SolverState init_state(const Problem& problem, const Eigen::VectorXd& x0,
                       const SolverConfig& config);

/// Runs one search/poll/update iteration.
IterationResult iterate(SolverState& state);

/// Mesh point incumbent + 2 * last successful displacement, or nothing when
/// there is no prior success, the point is out of bounds, or it is already
/// cached.
std::optional<Candidate> speculative_search(const SolverState& state);

/// Re-picks the incumbent as the cached point of least merit (ties by
/// smallest eval_index). Returns true when the incumbent changed.
bool reselect_incumbent(SolverState& state);

/// Full run. Initialization failures are reported in the record
/// (outcome = error), not thrown.
RunRecord solve(const Problem& problem, const Eigen::VectorXd& x0,
                const SolverConfig& config);

/// Same loop with f restricted to the feasible set. Requires p = 0 and a
/// feasible x0.
RunRecord solve_extreme_barrier(const Problem& problem, const Eigen::VectorXd& x0,
                                SolverConfig config);

/// Replays the run-level properties over a finished record.
InvariantReport check_invariants(const RunRecord& record);

/// problem=... seed=... evals=... best_feasible_f=... rho=... delta=...
std::string summary_line(const RunRecord& record);

}  // namespace madspip
