#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "soliton/construction.hpp"
#include "soliton/profiles.hpp"

using namespace soliton;

TEST_CASE("one-dimensional profile is log cosh") {
  auto p = solve_radial_ivp(1, 0.0, 10.0, 1e-2);
  double err = 0.0;
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    double r = p.grid[i];
    err = std::max(err, std::abs(p.values[i] - std::log(std::cosh(r))));
    CHECK(p.slopes[i] == doctest::Approx(std::tanh(r)).epsilon(1e-9));
  }
  CHECK(err < 1e-8);
  CHECK(p.check_invariants().empty());
}

TEST_CASE("two-sided bounds in higher dimension") {
  for (int n = 2; n <= 5; ++n) {
    auto p = solve_radial_ivp(n, 0.0, 30.0, 1e-2);
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
      double r = p.grid[i];
      CHECK(p.values[i] >= r - n - 1e-9);
      CHECK(p.values[i] <= r + 1e-9);
      CHECK(p.slopes[i] >= r / std::sqrt(double(n * n) + r * r) - 1e-9);
    }
  }
}

TEST_CASE("profile with c > 0 stays strictly spacelike") {
  auto p = solve_radial_ivp(2, 1.0, 20.0, 1e-2);
  CHECK(p.check_invariants().empty());
  CHECK(p.slopes.back() < 1.0);
  // H = 1/sqrt(1 - psi'^2) + c grows without bound
  CHECK(p.mean_curvature(p.grid.size() - 1) > p.mean_curvature(p.grid.size() / 2));
}

TEST_CASE("barriers against closed forms") {
  for (double K : {0.5, 2.0, -1.5}) {
    for (double t : {0.3, 1.0, 4.0}) {
      // n = 1: w is linear, w~ is K asinh(t / |K|)
      CHECK(barrier_w(K, 1, t) == doctest::Approx(t * K / std::sqrt(1 + K * K)).epsilon(1e-10));
      CHECK(barrier_w_tilde(K, 1, t) == doctest::Approx(K * std::asinh(t / std::abs(K))).epsilon(1e-10));
      CHECK(barrier_w(K, 2, t) == doctest::Approx(K * std::asinh(t / std::abs(K))).epsilon(1e-10));
    }
  }
  std::vector<double> ts;
  for (int i = 0; i <= 490; ++i) ts.push_back(0.1 + 0.01 * i);
  auto res = barrier_residuals(-4.0, 3, ts);
  CHECK(res.sup_w < 1e-8);
  CHECK(res.sup_w_tilde < 1e-8);
}

TEST_CASE("barrier constants hit the boundary value") {
  double K1 = solve_K1(3, 0.9, 0.4);
  CHECK(K1 > 0.0);
  CHECK(barrier_w(K1, 3, 0.9) == doctest::Approx(0.4).epsilon(1e-9));
  double K2 = solve_K2(2, 0.6, -0.2);
  CHECK(K2 < 0.0);
  CHECK(barrier_w_tilde(K2, 2, 0.6) == doctest::Approx(-0.2).epsilon(1e-9));
  CHECK_THROWS(solve_K1(2, 1.0, -0.3));
}

TEST_CASE("boundary value problem reproduces the initial value solution") {
  auto ivp = solve_radial_ivp(2, 0.0, 1.0, 1e-3);
  double r = 0.8, C = ivp.value_at(r);
  auto bvp = solve_bvp(2, 0.0, r, C);
  double err = 0.0;
  for (std::size_t i = 0; i < bvp.grid.size(); ++i) err = std::max(err, std::abs(bvp.values[i] - ivp.value_at(bvp.grid[i])));
  CHECK(err < 1e-6);
  CHECK(bvp.values.back() == doctest::Approx(C).epsilon(1e-10));
  CHECK(std::abs(bvp.slopes.front()) < 1e-4);
}

TEST_CASE("boundary value sandwiches") {
  auto up = solve_bvp(3, 0.0, 0.6, 0.25);
  auto s = bvp_sandwich(up, 0.6, 0.25);
  CHECK(s.applicable);
  CHECK(s.lower_slack > -1e-8);
  CHECK(s.upper_slack > -1e-8);
  // the lower barrier needs K2^2 >= r^{2n+2} / (1 - r^2), which only some C meet
  int used = 0;
  for (double C : {-0.05, -0.1, -0.2, -0.3, -0.4, -0.45}) {
    auto down = solve_bvp(2, 0.0, 0.5, C);
    auto t = bvp_sandwich(down, 0.5, C);
    if (!t.applicable) continue;
    ++used;
    CHECK(t.lower_slack > -1e-8);
    CHECK(t.upper_slack > -1e-8);
  }
  CHECK(used > 0);
}

TEST_CASE("normalization at infinity") {
  auto p = solve_radial_ivp(1, 0.0, 60.0, 1e-2);
  CHECK(normalize_at_infinity(p) == doctest::Approx(-std::log(2.0)).epsilon(1e-6));
  auto q = solve_radial_ivp(1, 0.0, 20.0, 1e-2);
  CHECK_THROWS(normalize_at_infinity(q));

  NormalizedProfile psi(1, 0.0, 60.0);
  CHECK(psi(5.0) == doctest::Approx(std::log(std::exp(5.0) + std::exp(-5.0))).epsilon(1e-6));
  CHECK(psi(300.0) == doctest::Approx(300.0).epsilon(1e-6));
}

TEST_CASE("argument checks") {
  CHECK_THROWS(solve_radial_ivp(0, 0.0, 1.0, 0.1));
  CHECK_THROWS(solve_radial_ivp(2, -1.0, 1.0, 0.1));
  CHECK_THROWS(solve_bvp(2, 0.0, 1.0, 1.5));
}
