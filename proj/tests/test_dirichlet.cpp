#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "soliton/dirichlet.hpp"
#include "soliton/profiles.hpp"

using namespace soliton;

namespace {

// radial oracle: psi(|x|) - psi(R) from the ODE in dimension 2
double disk_error(double R, double c, double h) {
  SolverConfig cfg;
  cfg.h = h;
  auto s = solve_dirichlet(ConvexDomain::disk(R), c, 0.0, cfg);
  REQUIRE(s.ok());
  auto psi = solve_radial_ivp(2, c, R + 0.1, 1e-3);
  double err = 0.0;
  const Grid& g = s.field.grid();
  for (std::size_t q = 0; q < g.unknowns(); ++q) {
    Vec2 x = g.position_of_node(g.node_of(int(q)));
    err = std::max(err, std::abs(s.field.value(int(q)) - (psi.value_at(norm(x)) - psi.value_at(R))));
  }
  return err;
}

}  // namespace

TEST_CASE("disk solution matches the radial profile") {
  for (double c : {0.0, 1.0}) {
    double e1 = disk_error(1.5, c, 1.0 / 16), e2 = disk_error(1.5, c, 1.0 / 32);
    CHECK(e1 <= 5.0 / 256);
    CHECK(e2 <= 5.0 / 1024);
    CHECK(e1 / e2 > 3.0);
    CHECK(e1 / e2 < 5.0);
  }
}

TEST_CASE("constant boundary data shifts the solution") {
  SolverConfig cfg;
  cfg.h = 1.0 / 16;
  auto a = solve_dirichlet(ConvexDomain::disk(1.0), 0.0, 0.0, cfg);
  auto b = solve_dirichlet(ConvexDomain::disk(1.0), 0.0, 2.5, cfg);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  for (std::size_t q = 0; q < a.field.values().size(); ++q)
    CHECK(b.field.values()[q] - a.field.values()[q] == doctest::Approx(2.5).epsilon(1e-8));
}

TEST_CASE("polygon solve and certificates") {
  SolverConfig cfg;
  cfg.h = 1.0 / 16;
  auto s = solve_dirichlet(ConvexDomain::polygon({{-1, -1}, {2, -1}, {2, 1}, {-1, 1}}), 0.5, 0.0, cfg);
  REQUIRE(s.ok());
  auto g = gradient_certificate(s.field);
  CHECK(g.passed());
  CHECK(g.max_gradient < 1.0);
  // interior minimum below the boundary value
  CHECK(*std::min_element(s.field.values().begin(), s.field.values().end()) < 0.0);
  auto r = residual_field(s.field, 0.5);
  CHECK(r.sup < 1e-6);
}

TEST_CASE("convexity when the boundary curvature is at most one") {
  SolverConfig cfg;
  cfg.h = 1.0 / 16;
  auto s = solve_dirichlet(ConvexDomain::disk(2.0), 0.0, 0.0, cfg);
  REQUIRE(s.ok());
  auto cc = convexity_certificate(s.field);
  CHECK(cc.passed);
  CHECK(cc.min_eigenvalue > -cc.tolerance);
}

TEST_CASE("level sets and the induced Laplacian") {
  SolverConfig cfg;
  cfg.h = 1.0 / 32;
  auto s = solve_dirichlet(ConvexDomain::disk(2.0), 1.0, 0.0, cfg);
  REQUIRE(s.ok());
  double umin = *std::min_element(s.field.values().begin(), s.field.values().end());
  auto ls = level_set_identity(s.field, 0.5 * umin, 1.0);
  CHECK(ls.samples > 10);
  CHECK(ls.sup_residual < 0.1);
  auto lap = induced_laplacian_check(s.field, 1.0);
  CHECK(lap.sup_residual < 0.1);
}

TEST_CASE("comparison with a shifted copy") {
  SolverConfig cfg;
  cfg.h = 1.0 / 16;
  auto s = solve_dirichlet(ConvexDomain::disk(1.0), 0.0, 0.0, cfg);
  REQUIRE(s.ok());
  GridField up = s.field;
  up += 0.3;
  auto rep = comparison_check(s.field, up, Relation::super, 0.0);
  CHECK(rep.conclusive);
  CHECK(rep.holds);
}

TEST_CASE("oversized grids are refused") {
  SolverConfig cfg;
  cfg.h = 1.0 / 16;
  cfg.max_nodes = 100;
  auto s = solve_dirichlet(ConvexDomain::disk(1.0), 0.0, 0.0, cfg);
  CHECK(s.status == SolveStatus::too_large);
}

TEST_CASE("config validation") {
  SolverConfig cfg;
  cfg.h = -1.0;
  CHECK_THROWS(cfg.validate());
  cfg = SolverConfig{};
  cfg.sigma_schedule = {0.5, 0.25};
  CHECK_THROWS(cfg.validate());
}
