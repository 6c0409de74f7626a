#include "madspip/mesh.hpp"

#include <cmath>
#include <stdexcept>

namespace madspip {

MeshState MeshState::initial(double delta0, double theta_delta) {
  if (!(delta0 > 0.0)) throw std::invalid_argument("delta0 must be positive");
  int exponent = 0;
  const double mantissa = std::frexp(theta_delta, &exponent);
  if (!(theta_delta > 0.0 && theta_delta < 1.0) || mantissa != 0.5) {
    throw std::invalid_argument("theta_delta must be 1/2^s with s >= 1");
  }
  MeshState mesh;
  mesh.delta0 = delta0;
  mesh.delta_frame = delta0;
  mesh.delta_mesh = mesh_size(delta0, delta0);
  mesh.theta_delta = theta_delta;
  mesh.delta_max = 1e3 * delta0;
  return mesh;
}

int MeshState::mesh_exponent() const {
  int exponent = 0;
  const double mantissa = std::frexp(delta_mesh / delta0, &exponent);
  if (mantissa != 0.5) {
    throw std::logic_error("mesh size is not a power-of-two multiple of delta0");
  }
  return exponent - 1;
}

double mesh_size(double delta_frame, double delta0) {
  if (!(delta_frame > 0.0) || !(delta0 > 0.0)) {
    throw std::invalid_argument("frame sizes must be positive");
  }
  // delta_frame / delta0 is a power of two on any reachable frame, so this
  // order keeps the mesh an exact power-of-two multiple of delta0
  return std::min(delta_frame, delta_frame * (delta_frame / delta0));
}

MeshState update_frame(const MeshState& mesh, bool success) {
  MeshState next = mesh;
  if (success) {
    const double grown = mesh.delta_frame / mesh.theta_delta;
    if (grown > mesh.delta_max) return next;
    next.delta_frame = grown;
  } else {
    next.delta_frame = mesh.delta_frame * mesh.theta_delta;
  }
  next.delta_mesh = mesh_size(next.delta_frame, next.delta0);
  return next;
}

PollDirection snap_to_mesh(const Eigen::VectorXd& anchor,
                           const Eigen::VectorXd& target, double delta_mesh) {
  if (!(delta_mesh > 0.0)) throw std::invalid_argument("mesh size must be positive");
  if (anchor.size() != target.size()) throw std::invalid_argument("dimension mismatch");
  PollDirection d;
  d.steps.resize(anchor.size());
  for (Eigen::Index i = 0; i < anchor.size(); ++i) {
    d.steps(i) = std::int64_t(std::round((target(i) - anchor(i)) / delta_mesh));
  }
  d.displacement = d.steps.cast<double>() * delta_mesh;
  return d;
}

Eigen::VectorXd DirectionGenerator::random_unit_vector(int n) {
  Eigen::VectorXd v(n);
  double norm = 0.0;
  do {
    for (int i = 0; i < n; ++i) v(i) = normal_(engine_);
    norm = v.norm();
  } while (norm == 0.0);
  return v / norm;
}

std::vector<PollDirection> DirectionGenerator::poll_directions(int n,
                                                               const MeshState& mesh) {
  if (n < 1) throw std::invalid_argument("dimension must be positive");
  if (!(mesh.delta_frame / mesh.delta_mesh < 0x1p62)) {
    throw std::out_of_range("frame too large for integer mesh steps");
  }
  const Eigen::VectorXd v = random_unit_vector(n);
  const Eigen::MatrixXd householder =
      Eigen::MatrixXd::Identity(n, n) - 2.0 * v * v.transpose();

  std::vector<PollDirection> directions;
  directions.reserve(std::size_t(2 * n));
  for (int j = 0; j < n; ++j) {
    const Eigen::VectorXd column = householder.col(j);
    const double max_abs = column.cwiseAbs().maxCoeff();
    PollDirection d;
    d.steps.resize(n);
    for (int i = 0; i < n; ++i) {
      // column(i) / max_abs is exactly +-1 on the largest coordinate, so that
      // coordinate lands on the frame boundary.
      const double scaled = (column(i) / max_abs) * mesh.delta_frame;
      d.steps(i) = std::int64_t(std::trunc(scaled / mesh.delta_mesh));
    }
    d.displacement = d.steps.cast<double>() * mesh.delta_mesh;
    directions.push_back(std::move(d));
  }
  for (int j = 0; j < n; ++j) {
    PollDirection negated;
    negated.steps = -directions[std::size_t(j)].steps;
    negated.displacement = -directions[std::size_t(j)].displacement;
    directions.push_back(std::move(negated));
  }
  return directions;
}

Lattice::Lattice(Eigen::VectorXd anchor, double delta0)
    : anchor_(std::move(anchor)), delta0_(delta0) {
  if (!(delta0 > 0.0)) throw std::invalid_argument("delta0 must be positive");
}

namespace {

Lattice::Coord unit(int mesh_exponent) {
  if (!Lattice::representable(mesh_exponent)) {
    throw std::out_of_range("mesh finer than lattice resolution");
  }
  return Lattice::Coord(1) << (mesh_exponent + Lattice::kResolutionBits);
}

}  // namespace

Lattice::Offset Lattice::offset_of(const StepVector& steps, int mesh_exponent) const {
  const Coord u = unit(mesh_exponent);
  Offset out(std::size_t(steps.size()));
  for (Eigen::Index i = 0; i < steps.size(); ++i) out[std::size_t(i)] = Coord(steps(i)) * u;
  return out;
}

StepVector Lattice::snap(const Offset& offset, int mesh_exponent) const {
  const Coord u = unit(mesh_exponent);
  StepVector steps(Eigen::Index(offset.size()));
  for (std::size_t i = 0; i < offset.size(); ++i) {
    Coord q = offset[i] / u;
    const Coord r = offset[i] % u;
    const Coord twice_abs_r = r < 0 ? -2 * r : 2 * r;
    if (twice_abs_r >= u) q += offset[i] < 0 ? -1 : 1;
    steps(Eigen::Index(i)) = std::int64_t(q);
  }
  return steps;
}

Eigen::VectorXd Lattice::point(const Offset& offset) const {
  Eigen::VectorXd x(anchor_.size());
  for (Eigen::Index i = 0; i < anchor_.size(); ++i) {
    const long double q = std::ldexp(static_cast<long double>(offset[std::size_t(i)]),
                                     -kResolutionBits);
    x(i) = double(static_cast<long double>(anchor_(i)) +
                  static_cast<long double>(delta0_) * q);
  }
  return x;
}

Lattice::Offset Lattice::add(const Offset& a, const Offset& b) {
  Offset out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Lattice::Offset Lattice::scale(const Offset& a, std::int64_t factor) {
  Offset out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  return out;
}

bool Lattice::is_zero(const Offset& a) {
  for (Coord c : a) {
    if (c != 0) return false;
  }
  return true;
}

}  // namespace madspip
