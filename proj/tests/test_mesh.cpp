#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "madspip/mesh.hpp"

using namespace madspip;

namespace {

MeshState state_at(double delta, double delta0) {
  MeshState m = MeshState::initial(delta0);
  m.delta_frame = delta;
  m.delta_mesh = mesh_size(delta, delta0);
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x(i++) = a;
  return x;
}

}  // namespace

TEST_SUITE("formulas") {
  TEST_CASE("mesh_size examples") {
    CHECK(mesh_size(1, 1) == 1.0);
    CHECK(mesh_size(0.5, 1) == 0.25);
    CHECK(mesh_size(2, 1) == 2.0);
  }

  TEST_CASE("poll_directions examples") {
    DirectionGenerator gen(3);
    const auto one = gen.poll_directions(1, state_at(1, 1));
    REQUIRE(one.size() == 2);
    std::set<std::int64_t> steps{one[0].steps(0), one[1].steps(0)};
    CHECK(steps == std::set<std::int64_t>{-1, 1});

    const auto two = gen.poll_directions(2, state_at(1, 1));
    REQUIRE(two.size() == 4);
    CHECK((two[0].steps + two[2].steps).isZero());
    CHECK((two[1].steps + two[3].steps).isZero());

    // Delta = 0.25, Delta0 = 1: mesh 0.0625, at most 4 steps per coordinate
    const MeshState m = state_at(0.25, 1);
    CHECK(m.delta_mesh == 0.0625);
    const auto three = DirectionGenerator(42).poll_directions(3, m);
    REQUIRE(three.size() == 6);
    for (const auto& d : three) {
      CHECK(d.displacement.cwiseAbs().maxCoeff() <= 0.25);
      CHECK(d.steps.cwiseAbs().maxCoeff() <= 4);
      CHECK(d.steps.cwiseAbs().maxCoeff() == 4);
    }
  }

  TEST_CASE("update_frame examples") {
    const MeshState m = state_at(1, 1);
    CHECK(update_frame(m, true).delta_frame == 2.0);
    const MeshState shrunk = update_frame(m, false);
    CHECK(shrunk.delta_frame == 0.5);
    CHECK(shrunk.delta_mesh == 0.25);

    const MeshState top = state_at(1e3, 1);
    const MeshState capped = update_frame(top, true);
    CHECK(capped.delta_frame == 1e3);
    CHECK(capped.delta_mesh == top.delta_mesh);
    CHECK(capped.delta0 == top.delta0);
    CHECK(capped.delta_max == top.delta_max);
  }

  TEST_CASE("snap_to_mesh examples") {
    CHECK(snap_to_mesh(vec({0, 0}), vec({0.26, -0.24}), 0.25).displacement == vec({0.25, -0.25}));
    CHECK(snap_to_mesh(vec({1, 1}), vec({1, 1}), 0.125).displacement.isZero());
    CHECK(snap_to_mesh(vec({0}), vec({0.125}), 0.25).displacement == vec({0.25}));
    CHECK(snap_to_mesh(vec({0}), vec({-0.125}), 0.25).displacement == vec({-0.25}));
  }
}

TEST_CASE("mesh argument checks") {
  CHECK_THROWS_AS(mesh_size(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(mesh_size(1, -1), std::invalid_argument);
  CHECK_THROWS_AS(MeshState::initial(0), std::invalid_argument);
  CHECK_THROWS_AS(MeshState::initial(1, 0.3), std::invalid_argument);
  CHECK_NOTHROW(MeshState::initial(1, 0.25));
  CHECK_THROWS_AS(snap_to_mesh(vec({0}), vec({1}), 0), std::invalid_argument);
}

TEST_CASE("snap is idempotent on mesh points") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 1000; ++t) {
    const double delta = std::ldexp(1.0, -(t % 20));
    const Eigen::VectorXd anchor = vec({u(rng), u(rng), u(rng)});
    const Eigen::VectorXd target = vec({u(rng), u(rng), u(rng)});
    const PollDirection once = snap_to_mesh(anchor, target, delta);
    const PollDirection twice = snap_to_mesh(anchor, anchor + once.displacement, delta);
    CHECK(once.steps == twice.steps);
  }
}

TEST_CASE("mesh exponent is exact for awkward delta0") {
  for (double d0 : {0.4, 0.1, 0.3, 1.7, 1e-3, 123.456}) {
    MeshState m = MeshState::initial(d0);
    for (int k = 0; k < 60; ++k) {
      m = update_frame(m, k % 4 == 3);
      CHECK_NOTHROW(m.mesh_exponent());
    }
  }
}

TEST_CASE("frame walk keeps mesh inside frame") {
  MeshState m = MeshState::initial(0.6);
  std::mt19937_64 rng(9);
  for (int k = 0; k < 2000; ++k) {
    m = update_frame(m, rng() % 3 == 0);
    CHECK(m.delta_mesh <= m.delta_frame);
    CHECK(m.delta_mesh == mesh_size(m.delta_frame, m.delta0));
    CHECK(m.delta_frame <= m.delta_max);
    if (m.delta_frame < 1e-12) m = MeshState::initial(0.6);
    CHECK_NOTHROW(m.mesh_exponent());
  }
}

TEST_CASE("poll sets stay in the frame and do not collapse") {
  DirectionGenerator gen(17);
  MeshState m = MeshState::initial(0.6);
  for (int k = 0; k < 400; ++k) {
    const int n = 1 + k % 6;
    const auto dirs = gen.poll_directions(n, m);
    REQUIRE(dirs.size() == std::size_t(2 * n));
    for (int j = 0; j < n; ++j) {
      CHECK((dirs[std::size_t(j)].steps + dirs[std::size_t(j + n)].steps).isZero());
    }
    for (const auto& d : dirs) {
      const double norm = d.displacement.cwiseAbs().maxCoeff();
      CHECK(norm <= m.delta_frame);
      CHECK(norm >= m.delta_frame * m.theta_delta);
      CHECK((d.displacement - d.steps.cast<double>() * m.delta_mesh).isZero());
    }
    m = update_frame(m, k % 5 == 0);
    if (m.delta_frame < 1e-9) m = MeshState::initial(0.6);
  }
  // step counts would overflow
  CHECK_THROWS_AS(gen.poll_directions(2, state_at(1e-20, 1)), std::out_of_range);
}

TEST_CASE("direction generator is deterministic") {
  DirectionGenerator a(123), b(123), c(124);
  const MeshState m = state_at(0.125, 1);
  for (int k = 0; k < 50; ++k) {
    const auto da = a.poll_directions(4, m);
    const auto db = b.poll_directions(4, m);
    const auto dc = c.poll_directions(4, m);
    for (std::size_t i = 0; i < da.size(); ++i) CHECK(da[i].steps == db[i].steps);
    if (k == 0) CHECK(da[0].steps != dc[0].steps);
  }
}

TEST_CASE("normalized first directions cover the sphere") {
  for (int n : {2, 3}) {
    DirectionGenerator gen(2024);
    MeshState m = MeshState::initial(1.0);
    std::vector<Eigen::VectorXd> dirs;
    for (int k = 0; k < 10000; ++k) {
      const auto d = gen.poll_directions(n, m);
      dirs.push_back(d[0].displacement.normalized());
      m = update_frame(m, false);
      if (m.delta_frame < 1e-6) m = MeshState::initial(1.0);
    }
    // no cap of angular radius 30 degrees without a direction
    const double cos30 = std::cos(M_PI / 6);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    int empty = 0;
    for (int c = 0; c < 3000; ++c) {
      Eigen::VectorXd center(n);
      for (int i = 0; i < n; ++i) center(i) = normal(rng);
      center.normalize();
      bool hit = false;
      for (const auto& d : dirs) {
        if (d.dot(center) >= cos30) {
          hit = true;
          break;
        }
      }
      empty += hit ? 0 : 1;
    }
    CHECK(empty == 0);
  }
}

TEST_CASE("lattice offsets are exact") {
  const Lattice lat(vec({0.1, -0.3}), 0.6);
  StepVector s(2);
  s << 3, -5;
  const auto off = lat.offset_of(s, -4);
  CHECK(lat.snap(off, -4) == s);
  // the same point expressed on a finer mesh has the same key
  StepVector fine(2);
  fine << 6, -10;
  CHECK(lat.offset_of(fine, -5) == off);
  const Eigen::VectorXd x = lat.point(off);
  CHECK(x(0) == doctest::Approx(0.1 + 0.6 * 3 / 16.0).epsilon(1e-15));
  CHECK(x(1) == doctest::Approx(-0.3 - 0.6 * 5 / 16.0).epsilon(1e-15));
  CHECK(Lattice::is_zero(Lattice::add(off, Lattice::scale(off, -1))));
  CHECK_FALSE(Lattice::representable(-101));
  CHECK_THROWS_AS(lat.offset_of(s, -101), std::out_of_range);
}

TEST_CASE("lattice snap rounds half away from zero") {
  const Lattice lat(vec({0}), 1.0);
  StepVector one(1);
  one << 1;
  const auto half = lat.offset_of(one, -3);  // 1/8 on a 1/4 mesh
  CHECK(lat.snap(half, -2)(0) == 1);
  CHECK(lat.snap(Lattice::scale(half, -1), -2)(0) == -1);
  CHECK(lat.snap(Lattice::scale(half, 3), -2)(0) == 2);
}
