#pragma once

#include <span>
#include <string>
#include <vector>

namespace soliton {

// Sampled radial function phi on [0, r_max] together with phi'.
// The rapidity column atanh(phi') is what the integrator actually carries;
// it stays finite where phi' has already rounded to 1 in double precision.
struct RadialProfile {
  int n = 2;
  double c = 0.0;
  double shift = 0.0;  // constant subtracted from the raw solution (values[0] == -shift)
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> slopes;
  std::vector<double> rapidity;
  std::vector<double> ode_residual;

  double r_max() const { return grid.empty() ? 0.0 : grid.back(); }
  // cubic Hermite interpolation from values and slopes
  double value_at(double r) const;
  double slope_at(double r) const;
  // H = 1/sqrt(1 - phi'^2) + c at sample i
  double mean_curvature(std::size_t i) const;
  // strictness, normalization and trapezoid consistency; returns "" when fine
  std::string check_invariants(double trapezoid_tol = 1e-6) const;
};

double barrier_w(double K, int n, double t);
double barrier_w_tilde(double K, int n, double t);

struct BarrierResiduals {
  std::vector<double> w;        // L w_K
  std::vector<double> w_tilde;  // L w~_K + K / (t sqrt(t^{2n} + K^2))
  double sup_w = 0.0;
  double sup_w_tilde = 0.0;
};

// L f = f'' / (1 - f'^2) + (n - 1) f' / t, slopes from the closed-form integrands.
BarrierResiduals barrier_residuals(double K, int n, std::span<const double> t);

// K > 0 with w_K(r) = C (C in (0, r)), and K < 0 with w~_K(r) = C (C in (-r, 0)).
double solve_K1(int n, double r, double C);
double solve_K2(int n, double r, double C);

// psi'' / (1 - psi'^2) + (n - 1) psi' / r = 1 + c sqrt(1 - psi'^2), psi(0) = psi'(0) = 0,
// sampled on the uniform grid {0, h, 2h, ...} up to r_max.
RadialProfile solve_radial_ivp(int n, double c, double r_max, double h);

struct BvpOptions {
  int samples = 200;       // uniform output samples on [0, r]
  double eps_ratio = 2.0;  // eps_{j+1} = eps_j / eps_ratio
  double eps_min = 1e-7;   // relative to r
  double bracket_max = 400.0;
};

// Same ODE on (0, r) with phi(0) = 0 and phi(r) = C, |C| < r.
RadialProfile solve_bvp(int n, double c, double r, double C, const BvpOptions& opts = {});

struct BvpSandwich {
  bool applicable = false;  // hypothesis on (r, C) holds
  double K = 0.0;           // K1 for C > 0, K2 for C < 0
  double lower_slack = 0.0; // min over samples of phi - lower
  double upper_slack = 0.0; // min over samples of upper - phi
};
// C > 0, r^2 <= (n-1) C:  C t / r <= phi <= w_K1 with w_K1(r) = C
// C < 0, K2^2 >= r^{2n+2} / (1 - r^2):  w~_K2 <= phi <= C t / r with w~_K2(r) = C
BvpSandwich bvp_sandwich(const RadialProfile& phi, double r, double C);

// gamma = lim (psi(r) - r); throws when the tail estimates have not settled.
double normalize_at_infinity(const RadialProfile& profile);
RadialProfile shifted(RadialProfile profile, double gamma);

void write_profile_csv(const RadialProfile& profile, const std::string& path);

}  // namespace soliton
