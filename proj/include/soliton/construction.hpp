#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "soliton/dirichlet.hpp"
#include "soliton/geometry.hpp"
#include "soliton/profiles.hpp"

namespace soliton {

struct ConstructionConfig {
  SolverConfig solver;
  std::optional<double> eps_start;  // cone data: first eps tried, default 2 n C4
  double eps0 = 1.0;                // sphere data: eps_k = min(eps0, 10 / k)
  double r_min = 1.0;               // sphere data: radius below which f is faded out
  int rays = 720;
  int probe_per_axis = 9;           // probe grid is probe_per_axis^2 points
  double probe_fraction = 0.8;      // probe box half-width over the smallest inradius
  int upper_samples = 41;           // y samples per axis for the inf-convolution bound
  double tolerance_factor = 10.0;   // sandwich tolerance = factor * h
  int sandwich_n = 2;               // the "n" in V - eps <= u <= V + n + eps
  int jobs = 1;

  void validate() const;
};

struct LevelResult {
  double k = 0.0;
  double epsilon = 0.0;
  double max_curvature = 0.0;
  std::shared_ptr<const ConvexDomain> domain;
  SolveResult solve;  // field carries boundary value k
  GradientCertificate gradient;
  ConvexityCertificate convexity;
  // min over grid nodes of the slack in each inequality; >= -tolerance passes
  double lower_margin = 0.0;    // u - (V~ - eps)
  double upper_margin = 0.0;    // V~ + n + eps - u
  double barrier_margin = 0.0;  // min over lambda of u - <lambda, x> + eps
  double inf_conv_margin = 0.0; // inf_y {V~(y) + psi(|x - y|)} + n + eps - u on the probes
  // sphere data
  double boundary_deviation = 0.0;  // max |k - |x| - f| over the boundary samples
  double gap_estimate = 0.0;        // observed s on the boundary
  double q_lower_margin = 0.0;      // u - (q1 - s - eps) on the probes
  double q_upper_margin = 0.0;      // q2 + s + eps - u on the probes
  std::vector<double> annulus_radii;
  std::vector<double> annulus_deviation;  // sup over r in [r1, r2] of |u - |x| - f|
  std::vector<double> probe_values;       // NaN where the probe is outside
  bool passed = false;
  std::string failure;
};

struct ConstructionRun {
  AsymptoticData data;
  double c = 0.0;
  std::vector<double> k_list;
  double tolerance = 0.0;
  std::vector<Vec2> probes;
  std::vector<LevelResult> levels;
  bool nested = false;
  double cauchy_gap = 0.0;  // max probe difference between the last two levels
  double cauchy_tolerance = 0.0;
  bool passed = false;
  std::string failed_stage;  // "stage at k=..." of the first failure
  double seconds = 0.0;
};

// Cone data: Omega_k = {V~_eps < k}, u_k solves the Dirichlet problem with u_k = k on the boundary.
ConstructionRun construct_blowdown(const AsymptoticData& data, double c, std::vector<double> k_list,
                                   const ConstructionConfig& config);

// Sphere data |x| + f(x/|x|), c = 0: Omega_k = {f_{eps_k} < k}.
ConstructionRun construct_c2_data(const AsymptoticData& data, std::vector<double> k_list,
                                  const ConstructionConfig& config);

struct BlowdownSample {
  double r = 0.0;
  Vec2 direction{};
  double value = 0.0;      // u(r x) / r
  double deviation = 0.0;  // |u(r x) / r - V(x)|
  bool skipped = false;
};
struct BlowdownReport {
  std::vector<BlowdownSample> samples;
  double sup_deviation = 0.0;
  int skipped = 0;
};
BlowdownReport blowdown_ratio(const ConstructionRun& run, const std::vector<double>& radii,
                              const std::vector<Vec2>& directions);

// psi with psi'(0) = 0 and psi(r) - r -> 0, extended past the sampled range by its 1/r tail
class NormalizedProfile {
 public:
  NormalizedProfile(int n, double c, double r_max = 200.0, double h = 1e-2);
  double operator()(double r) const;
  const RadialProfile& profile() const { return profile_; }

 private:
  RadialProfile profile_;
  double tail_ = 0.0;
};

struct SupportFields {
  std::vector<double> theta;
  std::vector<Vec2> p1, p2;
  double lambda = 0.0;
  double worst_violation = 0.0;  // most negative slack over sampled pairs
  std::size_t worst_i = 0, worst_j = 0;
};

// <p1(eta), xi - eta> <= f(xi) - f(eta) <= <p2(eta), xi - eta> over all sample pairs
double support_violation(const AsymptoticData& f, const SupportFields& p, std::size_t* wi = nullptr,
                         std::size_t* wj = nullptr);
// p_i = f' tau -/+ lambda eta with lambda swept upward; throws when no lambda works
SupportFields support_fields(const AsymptoticData& f, int samples = 360);

struct QBounds {
  double q1 = 0.0, q2 = 0.0;
};
QBounds q_bounds(const AsymptoticData& f, const SupportFields& p, const NormalizedProfile& psi, Vec2 x);

}  // namespace soliton
