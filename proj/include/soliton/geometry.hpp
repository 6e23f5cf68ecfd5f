#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "soliton/numerics.hpp"

namespace soliton {

// Lipschitz field with an almost-everywhere gradient.
struct LipschitzField {
  std::function<double(Vec2)> value;
  std::function<Vec2(Vec2)> gradient;
  double lipschitz = 1.0;
  // Data is only available inside |x - box_center|_inf <= box_half when set.
  std::optional<double> box_half;
  Vec2 box_center{};
};

struct Jet {
  double value = 0.0;
  Vec2 grad{};
  double hxx = 0.0, hxy = 0.0, hyy = 0.0;
};

class SmoothField {
 public:
  virtual ~SmoothField() = default;
  virtual Jet jet(Vec2 x) const = 0;
  virtual double value(Vec2 x) const { return jet(x).value; }
  virtual Vec2 gradient(Vec2 x) const { return jet(x).grad; }
};

// A closed-form smooth field (used for exact cones away from the origin, norms, tests).
class AnalyticField : public SmoothField {
 public:
  explicit AnalyticField(std::function<Jet(Vec2)> f) : f_(std::move(f)) {}
  Jet jet(Vec2 x) const override { return f_(x); }

 private:
  std::function<Jet(Vec2)> f_;
};

struct AsymptoticData {
  enum class Mode { cone, sphere_data };
  Mode mode = Mode::cone;
  std::vector<Vec2> directions;  // Lambda
  double K = 0.0;
  // sphere data: f, f', f'' on a uniform angular grid over [0, 2pi)
  std::vector<double> f, df, d2f;

  static AsymptoticData cone(std::vector<Vec2> lambda, double K);
  static AsymptoticData sphere(const std::function<double(double)>& f,
                               const std::function<double(double)>& df,
                               const std::function<double(double)>& d2f, int samples = 720);
  void validate() const;
  double f_at(double theta) const;
  double df_at(double theta) const;
  double d2f_at(double theta) const;

 private:
  std::shared_ptr<const PeriodicSpline> fs_, dfs_, d2fs_;
};

double eval_cone(std::span<const Vec2> lambda, Vec2 x);
double eval_truncated_cone(std::span<const Vec2> lambda, double K, Vec2 x);
LipschitzField truncated_cone_field(const AsymptoticData& data);
// |x| + f(x/|x|), Lipschitz constant sqrt(1 + max f'^2 / r_min^2) outside r_min
LipschitzField sphere_data_field(const AsymptoticData& data, double r_min);

// Bump rho(y) = c exp(-1/(1-|y|^2)) on the unit disk with a polar Gauss rule.
class Mollifier {
 public:
  Mollifier(int radial_nodes = 32, int angular_nodes = 64);
  static const Mollifier& standard();

  double normalization() const { return norm_; }  // c
  double c4() const { return c4_; }                // int |D rho|
  std::size_t size() const { return pts_.size(); }

  const std::vector<Vec2>& points() const { return pts_; }
  const std::vector<double>& mass() const { return mass_; }        // w_k rho(y_k), sums to 1
  const std::vector<Vec2>& mass_grad() const { return dmass_; }    // w_k D rho(y_k)

 private:
  double norm_ = 0.0, c4_ = 0.0;
  std::vector<Vec2> pts_;
  std::vector<double> mass_;
  std::vector<Vec2> dmass_;
};

// V_eps = rho_eps * V. Value and gradient use the a.e. gradient of V
// (so |D V_eps| <= Lip(V) holds term by term); the Hessian moves one
// derivative onto the kernel.
class MollifiedField : public SmoothField {
 public:
  MollifiedField(LipschitzField base, double eps, const Mollifier& kernel = Mollifier::standard());
  Jet jet(Vec2 x) const override;
  double value(Vec2 x) const override;
  double epsilon() const { return eps_; }
  const LipschitzField& base() const { return base_; }

 private:
  void check_query(Vec2 x) const;
  LipschitzField base_;
  double eps_;
  const Mollifier* kernel_;
};

class ConvexDomain {
 public:
  enum class Kind { disk, polygon, radial };

  static ConvexDomain disk(double R, Vec2 center = {});
  static ConvexDomain polygon(std::vector<Vec2> vertices);  // convex, counter-clockwise
  // radii on 'rays' uniform angles about center; curvature may be empty
  static ConvexDomain radial(Vec2 center, std::vector<double> radii,
                             std::vector<double> curvature = {});

  Kind kind() const { return kind_; }
  Vec2 center() const { return center_; }
  double diameter() const { return diameter_; }
  double area() const;

  double radius_at(double theta) const;
  Vec2 boundary_point(double theta) const { return center_ + unit_at(theta) * radius_at(theta); }
  // negative inside; for radial kinds this is |p-c| - r(theta), not a distance
  double level(Vec2 p) const;
  bool contains(Vec2 p, double margin = 0.0) const;
  // distance from an interior point along a unit direction to the boundary,
  // or +inf if the boundary is farther than max_length
  double crossing(Vec2 p, Vec2 dir, double max_length) const;
  double distance_to_boundary(Vec2 p) const;

  const std::vector<double>& angles() const { return angles_; }
  const std::vector<double>& radii() const { return radii_; }
  const std::vector<double>& curvature() const { return curvature_; }
  void set_curvature(std::vector<double> kappa) { curvature_ = std::move(kappa); }
  double max_curvature() const;
  double min_curvature() const;
  // cross products of consecutive boundary samples; returns most negative normalized value
  double convexity_defect() const;
  std::vector<Vec2> boundary_samples() const;

  // recorded in the JSON header
  double level_k = 0.0;
  double epsilon = 0.0;

 private:
  Kind kind_ = Kind::disk;
  Vec2 center_{};
  double R_ = 0.0;
  std::vector<Vec2> vertices_;
  std::shared_ptr<const PeriodicSpline> spline_;
  std::vector<double> angles_, radii_, curvature_;
  double diameter_ = 0.0;
  void finish(int rays);
};

ConvexDomain sublevel_domain(const SmoothField& field, double k, int rays = 720);
std::vector<double> boundary_curvature(const SmoothField& field, const ConvexDomain& domain);

struct EpsilonChoice {
  double epsilon = 0.0;
  double max_curvature = 0.0;
  double certified_bound = 0.0;  // 2 n C4 / eps
  int doublings = 0;
  ConvexDomain domain;
};

// smallest eps = eps_start * 2^j with max boundary curvature of {V~_eps < k} <= 1;
// eps_start defaults to 2 n C4
EpsilonChoice choose_epsilon(const AsymptoticData& data, double k,
                             std::optional<double> eps_start = std::nullopt);

void write_domain_files(const ConvexDomain& domain, const std::string& csv_path,
                        const std::string& json_path);

}  // namespace soliton
