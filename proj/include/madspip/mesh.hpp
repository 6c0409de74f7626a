// Mesh and frame geometry, Householder polling, and exact lattice
// coordinates for trial points.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace madspip {

using StepVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Frame size, mesh size and the parameters that drive their updates.
///
/// theta_delta must be a reciprocal power of two (1/2, 1/4, ...) so that
/// every reachable frame and mesh size is delta0 times a power of two.
struct MeshState {
  double delta_frame = 1.0;
  double delta_mesh = 1.0;
  double delta0 = 1.0;
  double theta_delta = 0.5;
  double delta_max = 1e3;  // growth cap, 10^3 * delta0

  static MeshState initial(double delta0, double theta_delta = 0.5);

  /// log2(delta_mesh / delta0); exact for every reachable state.
  int mesh_exponent() const;
};

/// min{delta, delta^2 / delta0}. Throws std::invalid_argument on
/// nonpositive input.
double mesh_size(double delta_frame, double delta0);

/// Expands the frame on success and contracts it on failure. An expansion
/// that would exceed delta_max leaves the state unchanged.
MeshState update_frame(const MeshState& mesh, bool success);

/// Trial displacement delta_mesh * steps.
struct PollDirection {
  StepVector steps;
  Eigen::VectorXd displacement;
};

/// anchor + delta * round(target - anchor) / delta, rounding half away from
/// zero, returned as a displacement from the anchor.
PollDirection snap_to_mesh(const Eigen::VectorXd& anchor,
                           const Eigen::VectorXd& target, double delta_mesh);

/// Ortho 2N poll sets from a seeded random Householder basis.
class DirectionGenerator {
 public:
  explicit DirectionGenerator(std::uint64_t seed) : engine_(seed) {}

  /// Returns {d_1..d_n, -d_1..-d_n}. Each d_i is column i of
  /// I - 2 v v^T scaled to max-norm delta_frame and truncated toward zero
  /// onto the mesh.
  std::vector<PollDirection> poll_directions(int n, const MeshState& mesh);

  /// Uniform unit vector on the sphere S^{n-1}.
  Eigen::VectorXd random_unit_vector(int n);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Exact integer lattice coordinates for points of the form
/// anchor + delta0 * q, where q is a dyadic rational vector. Coordinates are
/// stored as integers in units of delta0 * 2^-kResolutionBits, so two points
/// compare equal exactly when they are the same mesh point.
class Lattice {
 public:
  static constexpr int kResolutionBits = 100;
  using Coord = __int128;
  using Offset = std::vector<Coord>;

  Lattice() = default;
  Lattice(Eigen::VectorXd anchor, double delta0);

  const Eigen::VectorXd& anchor() const { return anchor_; }
  double delta0() const { return delta0_; }
  int dimension() const { return int(anchor_.size()); }

  /// True when a mesh with this exponent is representable.
  static bool representable(int mesh_exponent) {
    return mesh_exponent + kResolutionBits >= 0;
  }

  /// Offset of `steps` mesh units at the given mesh exponent.
  Offset offset_of(const StepVector& steps, int mesh_exponent) const;

  /// Nearest mesh point (half away from zero) to `offset` at the given mesh
  /// exponent, expressed as steps.
  StepVector snap(const Offset& offset, int mesh_exponent) const;

  Eigen::VectorXd point(const Offset& offset) const;

  static Offset add(const Offset& a, const Offset& b);
  static Offset scale(const Offset& a, std::int64_t factor);
  static bool is_zero(const Offset& a);

 private:
  Eigen::VectorXd anchor_;
  double delta0_ = 1.0;
};

}  // namespace madspip
