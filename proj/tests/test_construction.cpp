#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "soliton/construction.hpp"

using namespace soliton;

TEST_CASE("support fields for zero data") {
  auto f = AsymptoticData::sphere([](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; });
  auto p = support_fields(f, 90);
  CHECK(p.lambda == 0.0);
  CHECK(p.worst_violation >= -1e-12);
}

TEST_CASE("support fields for a cosine") {
  auto f = AsymptoticData::sphere([](double t) { return 0.1 * std::cos(t); }, [](double t) { return -0.1 * std::sin(t); },
                                  [](double t) { return -0.1 * std::cos(t); });
  auto p = support_fields(f, 180);
  CHECK(p.lambda > 0.0);
  CHECK(p.lambda < 0.5);
  CHECK(support_violation(f, p) >= -1e-12);

  NormalizedProfile psi(2, 0.0);
  // q1 <= q2 everywhere, and both follow |x| + f far out
  for (Vec2 x : {Vec2{0, 0}, Vec2{3, 1}, Vec2{-40, 25}}) {
    auto q = q_bounds(f, p, psi, x);
    CHECK(q.q1 <= q.q2 + 1e-12);
  }
  Vec2 far{300, 0};
  auto q = q_bounds(f, p, psi, far);
  CHECK(q.q1 == doctest::Approx(300.1).epsilon(1e-3));
  CHECK(q.q2 == doctest::Approx(300.1).epsilon(1e-3));
}

TEST_CASE("normalized profile is increasing and tends to r") {
  NormalizedProfile psi(2, 0.0);
  double prev = psi(0.0);
  for (double r = 0.5; r < 250.0; r += 0.5) {
    double v = psi(r);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(std::abs(psi(250.0) - 250.0) < 0.05);
}

TEST_CASE("config validation") {
  ConstructionConfig cfg;
  cfg.probe_per_axis = 1;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("small cone construction") {
  ConstructionConfig cfg;
  cfg.solver.h = 1.0 / 8;
  cfg.eps_start = 2.0;
  cfg.jobs = 2;
  auto run = construct_blowdown(AsymptoticData::cone({{1, 0}, {-1, 0}}, 2.0), 0.0, {4.0, 5.0}, cfg);
  CHECK_MESSAGE(run.passed, run.failed_stage);
  CHECK(run.nested);
  REQUIRE(run.levels.size() == 2);
  for (auto& L : run.levels) {
    CHECK(L.max_curvature <= 1.0);
    CHECK(L.lower_margin >= -run.tolerance);
    CHECK(L.upper_margin >= -run.tolerance);
    CHECK(L.inf_conv_margin >= -run.tolerance);
  }
  CHECK(run.cauchy_gap <= run.cauchy_tolerance);
  auto b = blowdown_ratio(run, {2.0, 3.0}, {{1, 0}, {0, 1}});
  CHECK(b.samples.size() == 4);
}

TEST_CASE("sphere data with f = 0 gives round domains") {
  ConstructionConfig cfg;
  cfg.solver.h = 1.0 / 8;
  auto f = AsymptoticData::sphere([](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; });
  auto run = construct_c2_data(f, {4.0}, cfg);
  CHECK_MESSAGE(run.passed, run.failed_stage);
  REQUIRE(run.levels.size() == 1);
  auto& d = *run.levels[0].domain;
  double rmin = *std::min_element(d.radii().begin(), d.radii().end());
  double rmax = *std::max_element(d.radii().begin(), d.radii().end());
  CHECK(rmax - rmin < 1e-6);
  CHECK(run.levels[0].boundary_deviation <= run.levels[0].epsilon);
}
