#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "madspip/merit.hpp"

using namespace madspip;

namespace {

// The penalty examples are stated for the textbook constant b_rho = 10.
MeritParams textbook() {
  MeritParams p;
  p.b_rho = 10.0;
  return p;
}

double cint_of(std::vector<double> v) { return c_int(v); }
double phi_of(std::vector<double> v) { return phi_prox(v); }
double cext_of(std::vector<double> g, std::vector<double> h) { return c_ext(g, h); }

}  // namespace

TEST_SUITE("formulas") {
  TEST_CASE("phi_prox examples") {
    CHECK(phi_of({-2, -0.5}) == -0.5);
    CHECK(phi_of({0.5, -2}) == 0.5);
    CHECK(phi_of({0, -1}) == 0.0);
  }

  TEST_CASE("c_int examples") {
    CHECK(cint_of({-3, -1.5}) == -1.0);
    CHECK(cint_of({-0.5, -0.25}) == -0.125);
    CHECK(cint_of({0.5, -2}) == 0.5);
    CHECK(cint_of({}) == -1.0);
  }

  TEST_CASE("c_ext examples") {
    CHECK(cext_of({0.3, -1}, {0.2}) == doctest::Approx(0.13).epsilon(1e-15));
    CHECK(cext_of({-1, -2}, {}) == 0.0);
    CHECK(cext_of({}, {1, -1}) == 2.0);
  }

  TEST_CASE("merit examples") {
    MeritParams p;
    p.rho = 0.1;
    CHECK(merit(1.0, -1.0, 0.0, p) == 1.0);
    CHECK(merit(2.0, 0.0, 0.0, p) == kInf);
    p.rho = 1e-6;
    CHECK(merit(2.0, 0.0, 0.0, p) == kInf);
    p.rho = 0.1;
    // mpmath, 40 digits: 2.469314718055994530941723212145817656808
    CHECK(merit(2.0, -0.5, 0.04, p) == doctest::Approx(2.4693147180559945).epsilon(1e-15));
  }

  TEST_CASE("b_ext examples") {
    CHECK(compute_b_ext(523) == 100.0);
    CHECK(compute_b_ext(0) == 1.0);
    CHECK(compute_b_ext(0.05) == 1.0);
    CHECK(compute_b_ext(-523) == 100.0);
  }

  TEST_CASE("penalty criterion examples") {
    // mpmath: 10 * 0.1^(1+1e-9) = 0.99999999769741490965...
    MeritParams p = textbook();
    p.rho = 0.1;
    CHECK(penalty_update_check(1e-4, -1e-3, p));
    CHECK(penalty_update_check(0.5, -1.0, p));
    CHECK_FALSE(penalty_update_check(2.0, -1.0, p));
    CHECK_FALSE(penalty_update_check(1e-4, 0.0, p));
    // either side of the relaxed bound, 1e-14 relative
    CHECK(penalty_update_check(0.9999999976974049, -1.0, p));
    CHECK_FALSE(penalty_update_check(0.9999999976974249, -1.0, p));
  }
}

TEST_CASE("b_ext rejects a failed initial objective") {
  CHECK_THROWS_AS(compute_b_ext(kInf), std::invalid_argument);
  CHECK_THROWS_AS(compute_b_ext(std::nan("")), std::invalid_argument);
  CHECK(compute_b_ext(9.99) == 1.0);
  CHECK(compute_b_ext(10.0) == 10.0);
}

TEST_CASE("merit requires positive rho") {
  MeritParams p;
  p.rho = 0.0;
  CHECK_THROWS_AS(merit(1, -1, 0, p), std::invalid_argument);
}

TEST_CASE("merit propagates infinities") {
  MeritParams p;
  CHECK(merit(kInf, -0.5, 0, p) == kInf);
  CHECK(merit(1, -0.5, kInf, p) == kInf);
  CHECK(merit(1, 0.3, 0, p) == kInf);
}

TEST_CASE("criterion drops the proximity term without interior constraints") {
  MeritParams p = textbook();
  p.rho = 0.1;
  CHECK(penalty_update_check(0.5, -kInf, p, false));
  CHECK(penalty_update_check(0.5, 0.0, p, false));
  CHECK_FALSE(penalty_update_check(0.5, 0.0, p, true));
}

TEST_CASE("failed values in the violation measures") {
  CHECK(phi_of({-1, kInf}) == kInf);
  CHECK(cint_of({-1, kInf}) == kInf);
  CHECK(std::isinf(phi_of({-1, std::nan("")})));
  CHECK(cext_of({kInf}, {}) == kInf);
  CHECK(cext_of({}, {std::nan("")}) == kInf);
}

TEST_CASE("partition bookkeeping") {
  Partition part(3, {2});
  CHECK(part.interior() == std::vector<std::size_t>{2});
  CHECK(part.exterior() == std::vector<std::size_t>{0, 1});
  CHECK(part.move_to_interior(0));
  CHECK_FALSE(part.move_to_interior(0));
  CHECK(part.interior() == std::vector<std::size_t>{0, 2});
  CHECK_THROWS(Partition(2, {5}));
}

TEST_CASE("summarize splits g by partition") {
  Eigen::VectorXd g(2), h(1);
  g << -0.5, 0.3;
  h << 0.2;
  MeritParams p;
  p.rho = 0.1;
  const auto s = summarize(2.0, g, h, false, Partition(2, {0}), p);
  CHECK(s.phi_prox == -0.5);
  CHECK(s.c_int == -0.5);
  CHECK(s.c_ext == doctest::Approx(0.13));
  CHECK(s.merit == doctest::Approx(2.0 - 0.1 * std::log(0.5) + 1.3));
  CHECK(summarize(2.0, g, h, true, Partition(2, {0}), p).merit == kInf);
}

TEST_CASE("violation measure properties on random inputs") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3, 3);
  std::uniform_int_distribution<int> len(0, 5);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<double> g(std::size_t(len(rng))), h(std::size_t(len(rng)));
    for (double& v : g) v = trial % 7 == 0 ? std::round(u(rng)) : u(rng);
    for (double& v : h) v = trial % 5 == 0 ? 0.0 : u(rng);
    const double ci = c_int(g);
    bool all_nonpos = true;
    for (double v : g) all_nonpos = all_nonpos && v <= 0;
    CHECK(ci >= -1.0);
    CHECK((ci <= 0) == all_nonpos);
    if (!g.empty()) {
      const double phi = phi_prox(g);
      CHECK((ci < 0) == (phi < 0));
      CHECK((ci == 0) == (phi == 0));
    }
    const double ce = c_ext(g, h);
    bool zero = true;
    for (double v : g) zero = zero && v <= 0;
    for (double v : h) zero = zero && v == 0;
    CHECK(ce >= 0);
    CHECK((ce == 0) == zero);

    MeritParams p;
    p.rho = std::pow(10.0, -double(trial % 8));
    const double z = merit(u(rng), ci, ce, p);
    if (ci < 0) {
      CHECK(std::isfinite(z));
    } else {
      CHECK(z == kInf);
    }
  }
}

TEST_CASE("merit bounds f from above") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> f(-100, 100), ci(-1, -1e-12), ce(0, 10);
  for (int trial = 0; trial < 5000; ++trial) {
    MeritParams p;
    p.rho = std::pow(10.0, -double(trial % 12));
    p.b_ext = std::pow(10.0, double(trial % 3));
    const double fv = f(rng);
    CHECK(merit(fv, ci(rng), ce(rng), p) >= fv);
  }
}

TEST_CASE("merit limits as rho decreases") {
  MeritParams p;
  double prev_gap = kInf;
  for (int k = 1; k <= 12; ++k) {
    p.rho = std::pow(10.0, -k);
    const double gap = merit(3.0, -0.25, 0.0, p) - 3.0;
    CHECK(gap < prev_gap);
    CHECK(gap >= 0);
    prev_gap = gap;
    const double pen = merit(3.0, -0.25, 1e-3, p);
    CHECK(pen - 3.0 >= 1e-3 / p.rho * (1 - 1e-12));
  }
  CHECK(prev_gap < 1e-10);
}
