#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "soliton/geometry.hpp"

using namespace soliton;

TEST_CASE("disk") {
  auto d = ConvexDomain::disk(2.0, {1.0, -1.0});
  CHECK(d.area() == doctest::Approx(4 * kPi).epsilon(1e-6));
  CHECK(d.diameter() == doctest::Approx(4.0));
  CHECK(d.max_curvature() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(d.contains({2.5, -1.0}));
  CHECK_FALSE(d.contains({3.5, -1.0}));
  CHECK(d.distance_to_boundary({1.5, -1.0}) == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(d.crossing({1.0, -1.0}, {0.0, 1.0}, 10.0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::isinf(d.crossing({1.0, -1.0}, {0.0, 1.0}, 1.0)));
}

TEST_CASE("polygon") {
  auto sq = ConvexDomain::polygon({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}});
  CHECK(sq.area() == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(sq.diameter() == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-9));
  CHECK(sq.distance_to_boundary({0.5, 0.0}) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(sq.max_curvature() == 0.0);
  CHECK_THROWS(ConvexDomain::polygon({{-1, -1}, {-1, 1}, {1, 1}, {1, -1}}));  // clockwise
  CHECK_THROWS(ConvexDomain::polygon({{0, 0}, {2, 0}, {1, 0.2}, {2, 2}, {0, 2}}));
}

TEST_CASE("radial ellipse") {
  const double a = 2.0, b = 1.5;
  const int n = 720;
  std::vector<double> radii(n);
  for (int i = 0; i < n; ++i) {
    double th = 2 * kPi * i / n;
    radii[i] = a * b / std::hypot(b * std::cos(th), a * std::sin(th));
  }
  auto e = ConvexDomain::radial({}, radii);
  CHECK(e.area() == doctest::Approx(kPi * a * b).epsilon(1e-4));
  CHECK(e.diameter() == doctest::Approx(2 * a).epsilon(1e-4));
  CHECK(e.convexity_defect() >= -1e-12);
  CHECK(e.radius_at(kPi / 2) == doctest::Approx(b).epsilon(1e-6));
}

TEST_CASE("mollifier") {
  const auto& m = Mollifier::standard();
  double s = 0.0;
  for (double w : m.mass()) s += w;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  Vec2 g{};
  for (auto& d : m.mass_grad()) g = g + d;
  CHECK(norm(g) < 1e-10);
}

TEST_CASE("mollifying a linear function changes nothing") {
  LipschitzField lin{[](Vec2 x) { return 0.3 * x.x - 0.4 * x.y; }, [](Vec2) { return Vec2{0.3, -0.4}; }, 0.5};
  MollifiedField f(lin, 0.7);
  for (Vec2 x : {Vec2{0, 0}, Vec2{2, -3}, Vec2{-5, 1}}) {
    auto j = f.jet(x);
    CHECK(j.value == doctest::Approx(0.3 * x.x - 0.4 * x.y).epsilon(1e-12));
    CHECK(std::abs(j.hxx) + std::abs(j.hxy) + std::abs(j.hyy) < 1e-10);
  }
}

TEST_CASE("mollified norm lies between |x| and |x| + eps") {
  LipschitzField r{[](Vec2 x) { return norm(x); }, [](Vec2 x) { return x / norm(x); }, 1.0};
  MollifiedField f(r, 0.5);
  for (Vec2 x : {Vec2{0, 0}, Vec2{0.2, 0.1}, Vec2{4, 3}}) {
    double v = f.value(x);
    CHECK(v >= norm(x) - 1e-12);
    CHECK(v <= norm(x) + 0.5);
    CHECK(norm(f.gradient(x)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("cone evaluation") {
  std::vector<Vec2> lam{{1, 0}, {-1, 0}};
  CHECK(eval_cone(lam, {-3, 7}) == doctest::Approx(3.0));
  std::vector<Vec2> tri{unit_at(0), unit_at(2 * kPi / 3), unit_at(4 * kPi / 3)};
  CHECK(eval_cone(tri, {1, 0}) == doctest::Approx(1.0));
  CHECK(eval_cone(tri, {-1, 0}) == doctest::Approx(0.5));
  CHECK_THROWS(AsymptoticData::cone({{2, 0}, {-1, 0}}, 1.0).validate());
}

TEST_CASE("sublevel set of the norm is a disk") {
  AnalyticField r([](Vec2 x) {
    double s = norm(x);
    return Jet{s, x / s, x.y * x.y / (s * s * s), -x.x * x.y / (s * s * s), x.x * x.x / (s * s * s)};
  });
  auto d = sublevel_domain(r, 3.0);
  CHECK(d.radius_at(0.3) == doctest::Approx(3.0).epsilon(1e-8));
  auto kappa = boundary_curvature(r, d);
  for (double k : kappa) CHECK(k == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("epsilon selection for a cone") {
  auto data = AsymptoticData::cone({{1, 0}, {-1, 0}}, 2.0);
  auto ch = choose_epsilon(data, 4.0, 2.0);
  CHECK(ch.max_curvature <= 1.0);
  CHECK(ch.epsilon >= 2.0);
  CHECK(ch.domain.contains({0, 0}));
  CHECK(ch.domain.convexity_defect() >= -1e-9);
}
