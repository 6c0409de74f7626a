// Blackbox problem definition, evaluation cache, the external evaluator
// protocol, and the JSONL history row format.
#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "madspip/mesh.hpp"

namespace madspip {

struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  bool contains(const Eigen::VectorXd& x) const;
};

/// Raw blackbox outputs in the order f, g_1..g_m, h_1..h_p.
struct RawOutputs {
  double f = 0.0;
  Eigen::VectorXd g;
  Eigen::VectorXd h;
};

/// Thrown by evaluators to report a failed blackbox call.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Evaluator = std::function<RawOutputs(const Eigen::VectorXd&)>;

/// min f(x) s.t. g(x) <= 0, h(x) = 0, optionally inside a bound box.
struct Problem {
  std::string name;
  int n = 0;
  int m = 0;
  int p = 0;
  std::optional<Bounds> bounds;
  Evaluator evaluator;

  /// Throws std::invalid_argument when dimensions or bounds are inconsistent.
  void validate() const;
  bool within_bounds(const Eigen::VectorXd& x) const;
};

struct Evaluation {
  Eigen::VectorXd point;
  double f = kInfinity;
  Eigen::VectorXd g;
  Eigen::VectorXd h;
  bool failed = false;
  std::int64_t eval_index = 0;  // 1-based order of first evaluation
  std::string diagnostic;

  static constexpr double kInfinity = std::numeric_limits<double>::infinity();
};

/// Maps raw outputs to an Evaluation. Non-finite f or g become +inf and set
/// the failed flag; a non-finite h sets the failed flag. A size mismatch
/// is a failure as well.
Evaluation sanitize(const Problem& problem, const Eigen::VectorXd& point,
                    const RawOutputs& raw);

/// Exact-key evaluation store. Reads may run concurrently; writes are
/// serialized.
class Cache {
 public:
  using Key = Lattice::Offset;

  Cache() = default;
  Cache(Cache&&) noexcept = default;
  Cache& operator=(Cache&&) noexcept = default;

  const Evaluation* find(const Key& key) const;

  /// Stores a new evaluation and assigns the next eval_index.
  const Evaluation& insert(const Key& key, Evaluation evaluation);

  std::int64_t eval_count() const;

  /// Entries in evaluation order. Not safe against concurrent inserts.
  const std::deque<Evaluation>& entries() const { return entries_; }
  const Key& key(std::size_t i) const { return keys_.at(i); }

 private:
  std::unique_ptr<std::shared_mutex> mutex_ = std::make_unique<std::shared_mutex>();
  std::map<Key, std::size_t> index_;
  std::deque<Evaluation> entries_;
  std::deque<Key> keys_;
};

/// Key built from the exact bit patterns of the coordinates. Used when
/// points do not come from a lattice.
Cache::Key bitwise_key(const Eigen::VectorXd& point);

/// Returns the cached evaluation on a hit; otherwise calls the evaluator
/// (catching any exception as a failure), sanitizes, and stores.
const Evaluation& evaluate(const Problem& problem, const Eigen::VectorXd& point,
                           const Cache::Key& key, Cache& cache);
const Evaluation& evaluate(const Problem& problem, const Eigen::VectorXd& point,
                           Cache& cache);

/// all g <= 0, all |h| < eq_tol, and not failed.
bool is_feasible(const Evaluation& eval, double eq_tol);
bool is_feasible(const Eigen::VectorXd& g, const Eigen::VectorXd& h, bool failed,
                 double eq_tol);

/// Outcome of one external blackbox call.
struct ExternalResult {
  RawOutputs outputs;
  bool failed = false;
  std::string diagnostic;
};

/// Runs `executable` once: writes the point as one line of space-separated
/// decimals with 17 significant digits on stdin and reads one line of
/// 1 + m + p decimals (f, g, h) from stdout. Nonzero exit, timeout, or
/// malformed output yield a failed result.
ExternalResult run_external(const std::filesystem::path& executable,
                            const Eigen::VectorXd& point, int m, int p,
                            std::chrono::milliseconds timeout);

/// Evaluator adapter over run_external; failures throw EvaluationError.
Evaluator external_evaluator(std::filesystem::path executable, int m, int p,
                             std::chrono::milliseconds timeout);

/// Formats one point line of the evaluator wire format.
std::string format_point_line(const Eigen::VectorXd& point);

enum class RowStatus {
  initial,
  search_success,
  poll_success,
  unsuccessful,
  cache_hit,
  rejected_bounds,
  failed,
};

const char* to_string(RowStatus status);
RowStatus row_status_from_string(const std::string& text);

/// One line of the JSONL run history.
struct HistoryRow {
  std::optional<std::int64_t> eval_index;  // absent for rejected points
  Eigen::VectorXd x;
  double f = Evaluation::kInfinity;
  Eigen::VectorXd g;
  Eigen::VectorXd h;
  bool failed = false;
  double cint = -1.0;
  double cext = 0.0;
  std::optional<double> rho;  // absent in extreme-barrier runs
  double delta_frame = 0.0;
  bool incumbent = false;
  std::int64_t iteration = 0;
  RowStatus status = RowStatus::unsuccessful;

  nlohmann::ordered_json to_json() const;
  static HistoryRow from_json(const nlohmann::json& j);
};

/// JSON encoding of extended reals: finite values as numbers, the rest as
/// the strings "inf", "-inf", "nan".
nlohmann::ordered_json json_real(double value);
double real_from_json(const nlohmann::json& j);

}  // namespace madspip
