// Penalty-interior-point merit function and the penalty parameter rules.
//
// Inequality constraints are split into an interior set, aggregated into a
// thresholded log barrier, and an exterior set which is penalized together
// with the equality constraints:
//
//   z(x; rho) = f(x) - b_int * rho * log(-c_int(x)) + (b_ext / rho) * c_ext(x)
//
// and z = +inf whenever c_int(x) >= 0.
#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace madspip {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Disjoint split of the inequality indices {0..m-1} into interior and
/// exterior sets. Both lists are kept sorted.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::size_t m);  // everything exterior
  Partition(std::size_t m, std::vector<std::size_t> interior);

  std::size_t size() const { return interior_flag_.size(); }
  bool is_interior(std::size_t l) const { return interior_flag_.at(l); }
  const std::vector<std::size_t>& interior() const { return interior_; }
  const std::vector<std::size_t>& exterior() const { return exterior_; }

  /// Moves l from the exterior set to the interior set. Returns false if l
  /// was already interior.
  bool move_to_interior(std::size_t l);

  bool operator==(const Partition&) const = default;

 private:
  void rebuild();

  std::vector<bool> interior_flag_;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> exterior_;
};

struct MeritParams {
  double rho = 0.1;
  double b_int = 1.0;
  double b_ext = 1.0;
  double theta_rho = 1e-2;
  double beta = 1.0 + 1e-9;
  // The textbook setting is 10. With an isotropic mesh that ties rho to the
  // frame size too tightly and polling stalls in the penalty valley; 0.03
  // keeps rho one step behind the frame instead.
  double b_rho = 0.03;
  double b_c = 1e10;
  // Threshold t in min{t, -g}; fixed at 1 so that log(-c_int) <= 0.
  static constexpr double log_threshold = 1.0;
};

struct ViolationSummary {
  double phi_prox = -kInf;  // -inf when the interior set is empty
  double c_int = -1.0;
  double c_ext = 0.0;
  double merit = kInf;
};

/// max of the values; +inf propagates.
double phi_prox(std::span<const double> g_int_values);

/// -prod min{1, -g} if all g <= 0, otherwise phi_prox. Empty input gives -1.
double c_int(std::span<const double> g_int_values);

/// sum max{0, g}^2 + sum h^2. Non-finite input gives +inf.
double c_ext(std::span<const double> g_ext_values,
             std::span<const double> h_values);

/// Scaled merit. +inf when cint >= 0 or f is not finite.
double merit(double f, double cint, double cext, const MeritParams& params);

/// Power-of-ten exterior scaling from the objective at the starting point.
/// Throws std::invalid_argument when f0 is not finite.
double compute_b_ext(double f0);

/// Relaxed penalty reduction test, applied after an unsuccessful iteration:
///   delta_next <= min{b_rho * rho^beta, b_c * phi^2}.
/// Pass has_interior = false when the interior set is empty; the phi term is
/// then dropped.
bool penalty_update_check(double delta_next, double phi_prox_value,
                          const MeritParams& params, bool has_interior = true);

/// Violation measures and merit of raw outputs under a partition. A failed
/// evaluation yields merit +inf.
ViolationSummary summarize(double f, const Eigen::VectorXd& g,
                           const Eigen::VectorXd& h, bool failed,
                           const Partition& partition,
                           const MeritParams& params);

}  // namespace madspip
