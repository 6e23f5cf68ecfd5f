#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "soliton/dirichlet.hpp"
#include "soliton/variational.hpp"

using namespace soliton;

namespace {

std::shared_ptr<const Grid> square_grid(double h) {
  auto d = std::make_shared<const ConvexDomain>(ConvexDomain::polygon({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}));
  return std::make_shared<const Grid>(d, h);
}

GridField disk_solution(double c) {
  SolverConfig cfg;
  cfg.h = 1.0 / 16;
  auto s = solve_dirichlet(ConvexDomain::disk(1.5), c, 0.0, cfg);
  REQUIRE(s.ok());
  return s.field;
}

}  // namespace

TEST_CASE("functional of constants and linear functions") {
  auto g = square_grid(1.0 / 32);
  auto zero = GridField::sample(g, [](Vec2) { return 0.0; });
  CHECK(functional_F(zero, Weight{2.0}).value == doctest::Approx(12.0).epsilon(1e-9));
  // e^{-0.6 x} sqrt(1 - 0.36) over the square
  auto lin = GridField::sample(g, [](Vec2 x) { return 0.6 * x.x; });
  double exact = 2.0 * (2.0 * std::sinh(0.6) / 0.6) * 0.8;
  auto F = functional_F(lin);
  CHECK(F.value == doctest::Approx(exact).epsilon(1e-4));
  CHECK(F.clamped == 0);
  CHECK(F.max_gradient == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("first variation matches a finite difference") {
  auto u = disk_solution(0.0);
  auto eta = [](Vec2 x) {
    double r2 = dot(x, x);
    return r2 < 1.0 ? std::pow(1.0 - r2, 3) : 0.0;
  };
  auto fv = first_variation(u, eta);
  CHECK(fv.agree);
  // u solves the Euler-Lagrange equation, so both forms are small
  CHECK(std::abs(fv.weak) < 0.05 * fv.eta_norm + 1e-3);
  CHECK(std::abs(fv.strong) < 0.05 * fv.eta_norm + 1e-3);
}

TEST_CASE("projection restores admissibility") {
  auto g = square_grid(1.0 / 16);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-0.3, 0.3);
  auto w = GridField::sample(g, [](Vec2 x) { return 0.5 * x.x; });
  for (double& v : w.values()) v += U(rng);
  CHECK(functional_F(w).max_gradient > 1.0);
  CHECK(project_admissible(w));
  auto F = functional_F(w);
  CHECK(F.max_gradient <= 1.0 + 1e-9);
}

TEST_CASE("solutions beat random competitors") {
  for (double c : {0.0, 1.0}) {
    auto u = disk_solution(c);
    auto rep = maximality_test(u, 20, 11, c);
    CHECK(rep.passed);
    CHECK(rep.worst_margin <= rep.tolerance);
    CHECK(rep.spike_margin < 0.0);
    auto again = maximality_test(u, 20, 11, c, 2);
    CHECK(again.worst_margin == rep.worst_margin);
  }
}

TEST_CASE("reversed Cauchy-Schwarz") {
  CHECK(reversed_cauchy_schwarz_check({0.5, 0.1}, {0.5, 0.1}, 1.0));
  CHECK(reversed_cauchy_schwarz_check({0.9, 0.0}, {-0.9, 0.0}, 1.0));
  auto a = reversed_cauchy_schwarz_audit(100000, 13);
  CHECK(a.pairs == 100000);
  CHECK(a.violations == 0);
  CHECK(a.worst_gap <= 1e-12);
}
