#include "soliton/profiles.hpp"

#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "soliton/io.hpp"
#include "soliton/numerics.hpp"

namespace soliton {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::array<double, 2>;  // (phi, beta) with phi' = tanh(beta)

// beta' = 1 + c sech(beta) - (n-1) tanh(beta) / t
double rapidity_rhs(int n, double c, double t, double beta) {
  double s = c == 0.0 ? 0.0 : c / std::cosh(beta);
  return 1.0 + s - (n - 1) * std::tanh(beta) / t;
}

struct RapiditySystem {
  int n;
  double c;
  void operator()(const State& s, State& ds, double t) const {
    ds[0] = std::tanh(s[1]);
    ds[1] = rapidity_rhs(n, c, t, s[1]);
  }
};

auto stepper(double tol) {
  return odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
}

void check_barrier_args(double K, int n, double t) {
  if (!(t >= 0.0)) throw std::domain_error("barrier: t must be >= 0");
  if (n < 1) throw std::domain_error("barrier: n must be >= 1");
  if (K == 0.0 || !std::isfinite(K)) throw std::domain_error("barrier: K must be nonzero");
}

// fourth-order first derivative of uniformly sampled data
std::vector<double> uniform_derivative(const std::vector<double>& y, double h) {
  const std::size_t m = y.size();
  std::vector<double> d(m, 0.0);
  if (m < 5) return d;
  for (std::size_t i = 0; i < m; ++i) {
    if (i >= 2 && i + 2 < m) {
      d[i] = (-y[i + 2] + 8.0 * y[i + 1] - 8.0 * y[i - 1] + y[i - 2]) / (12.0 * h);
    } else if (i < 2) {
      d[i] = (-25.0 * y[i] + 48.0 * y[i + 1] - 36.0 * y[i + 2] + 16.0 * y[i + 3] -
              3.0 * y[i + 4]) / (12.0 * h);
    } else {
      d[i] = (25.0 * y[i] - 48.0 * y[i - 1] + 36.0 * y[i - 2] - 16.0 * y[i - 3] +
              3.0 * y[i - 4]) / (12.0 * h);
    }
  }
  return d;
}

void fill_residual(RadialProfile& p) {
  const std::size_t m = p.grid.size();
  p.ode_residual.assign(m, 0.0);
  if (m < 5) return;
  double h = p.grid[1] - p.grid[0];
  auto db = uniform_derivative(p.rapidity, h);
  for (std::size_t i = 0; i < m; ++i) {
    if (p.grid[i] <= 0.0) continue;
    p.ode_residual[i] = db[i] - rapidity_rhs(p.n, p.c, p.grid[i], p.rapidity[i]);
  }
}

}  // namespace

double RadialProfile::value_at(double r) const {
  if (grid.empty()) throw std::logic_error("empty profile");
  if (r <= grid.front()) return values.front() + slopes.front() * (r - grid.front());
  if (r >= grid.back()) return values.back() + slopes.back() * (r - grid.back());
  auto it = std::upper_bound(grid.begin(), grid.end(), r);
  std::size_t j = static_cast<std::size_t>(it - grid.begin());
  std::size_t i = j - 1;
  double dt = grid[j] - grid[i];
  double s = (r - grid[i]) / dt;
  double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * values[i] + h10 * dt * slopes[i] + h01 * values[j] + h11 * dt * slopes[j];
}

double RadialProfile::slope_at(double r) const {
  if (r <= grid.front()) return slopes.front();
  if (r >= grid.back()) return slopes.back();
  auto it = std::upper_bound(grid.begin(), grid.end(), r);
  std::size_t j = static_cast<std::size_t>(it - grid.begin());
  std::size_t i = j - 1;
  double s = (r - grid[i]) / (grid[j] - grid[i]);
  return std::tanh((1 - s) * rapidity[i] + s * rapidity[j]);
}

double RadialProfile::mean_curvature(std::size_t i) const {
  return std::cosh(rapidity.at(i)) + c;
}

std::string RadialProfile::check_invariants(double trapezoid_tol) const {
  std::ostringstream err;
  if (grid.size() != values.size() || grid.size() != slopes.size()) return "column sizes differ";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      err << "grid not increasing at " << i;
      return err.str();
    }
    bool strict = rapidity.empty() ? std::abs(slopes[i]) < 1.0 : std::isfinite(rapidity[i]);
    if (!strict) {
      err << "not strictly spacelike at t=" << grid[i];
      return err.str();
    }
  }
  if (std::abs(values.front() + shift) > 1e-12) return "values[0] does not match the recorded shift";
  double acc = values.front();
  for (std::size_t i = 1; i < grid.size(); ++i) {
    acc += 0.5 * (slopes[i] + slopes[i - 1]) * (grid[i] - grid[i - 1]);
    double h = grid[i] - grid[i - 1];
    // trapezoid error grows with the local curvature; scale by the step
    if (std::abs(acc - values[i]) > trapezoid_tol + h * h * grid[i]) {
      err << "trapezoid mismatch at t=" << grid[i] << ": " << acc - values[i];
      return err.str();
    }
  }
  return "";
}

double barrier_w(double K, int n, double t) {
  check_barrier_args(K, n, t);
  return integrate(
      [&](double s) { return K / std::sqrt(std::pow(s, 2 * n - 2) + K * K); }, 0.0, t, 1e-12);
}

double barrier_w_tilde(double K, int n, double t) {
  check_barrier_args(K, n, t);
  return integrate([&](double s) { return K / std::sqrt(std::pow(s, 2 * n) + K * K); }, 0.0, t,
                   1e-12);
}

BarrierResiduals barrier_residuals(double K, int n, std::span<const double> ts) {
  BarrierResiduals out;
  for (double t : ts) {
    check_barrier_args(K, n, t);
    if (t == 0.0) throw std::domain_error("barrier_residuals: t = 0 is singular");
    // w' = K / sqrt(S), w'' = -K (n-1) t^{2n-3} / S^{3/2}, S = t^{2n-2} + K^2
    double S = std::pow(t, 2 * n - 2) + K * K;
    double w1 = K / std::sqrt(S);
    double w2 = -K * (n - 1) * std::pow(t, 2 * n - 3) / (S * std::sqrt(S));
    // 1 - w'^2 = t^{2n-2} / S, without the cancellation near t = 0
    double Lw = w2 * S / std::pow(t, 2 * n - 2) + (n - 1) * w1 / t;
    out.w.push_back(Lw);

    double St = std::pow(t, 2 * n) + K * K;
    double v1 = K / std::sqrt(St);
    double v2 = -K * n * std::pow(t, 2 * n - 1) / (St * std::sqrt(St));
    double Lv = v2 * St / std::pow(t, 2 * n) + (n - 1) * v1 / t;
    out.w_tilde.push_back(Lv + K / (t * std::sqrt(St)));
  }
  for (double v : out.w) out.sup_w = std::max(out.sup_w, std::abs(v));
  for (double v : out.w_tilde) out.sup_w_tilde = std::max(out.sup_w_tilde, std::abs(v));
  return out;
}

namespace {

// K -> barrier(K, r) is increasing; find K of the given sign hitting C
double solve_K(bool tilde, int n, double r, double C, double sign) {
  auto f = [&](double K) {
    return (tilde ? barrier_w_tilde(sign * K, n, r) : barrier_w(sign * K, n, r)) - C;
  };
  double target = sign * C;
  if (!(target > 0.0) || !(target < r)) {
    throw std::domain_error("barrier root: need 0 < |C| < r with the matching sign");
  }
  double lo = 1e-8, hi = 1.0;
  while (sign * f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericalFailure("barrier root", "no bracket for K");
  }
  while (sign * f(lo) > 0.0) {
    lo /= 2.0;
    if (lo < 1e-300) throw NumericalFailure("barrier root", "no bracket for K");
  }
  double K = bisect([&](double k) { return sign * f(k); }, lo, hi, 1e-13 * hi);
  return sign * K;
}

}  // namespace

double solve_K1(int n, double r, double C) { return solve_K(false, n, r, C, 1.0); }
double solve_K2(int n, double r, double C) { return solve_K(true, n, r, C, -1.0); }

RadialProfile solve_radial_ivp(int n, double c, double r_max, double h) {
  if (n < 1) throw std::domain_error("radial ivp: n must be >= 1");
  if (c < 0) throw std::domain_error("radial ivp: c must be >= 0");
  if (!(r_max > 0) || !(h > 0) || h > r_max) throw std::domain_error("radial ivp: bad r_max/h");
  const auto m = static_cast<std::size_t>(std::llround(r_max / h));
  if (m < 5) throw std::domain_error("radial ivp: fewer than 5 steps");
  const double step = r_max / static_cast<double>(m);

  RadialProfile p;
  p.n = n;
  p.c = c;
  p.grid.resize(m + 1);
  for (std::size_t i = 0; i <= m; ++i) p.grid[i] = step * static_cast<double>(i);
  p.values.assign(m + 1, 0.0);
  p.rapidity.assign(m + 1, 0.0);

  // series start: psi'' (0) = (1 + c) / n removes the (n-1) psi'/r singularity
  const double t0 = 1e-6;
  const double a = (1.0 + c) / n;
  State s{0.5 * a * t0 * t0, a * t0};
  std::vector<double> times(p.grid.begin() + 1, p.grid.end());
  times.insert(times.begin(), t0);
  std::size_t idx = 0;
  odeint::integrate_times(
      stepper(1e-13), RapiditySystem{n, c}, s, times.begin(), times.end(), 1e-4 * step,
      [&](const State& st, double) {
        if (idx > 0) {
          if (!std::isfinite(st[1])) {
            throw NumericalFailure("radial ivp", "rapidity overflow at r=" +
                                                     std::to_string(p.grid[idx]));
          }
          p.values[idx] = st[0];
          p.rapidity[idx] = st[1];
        }
        ++idx;
      });
  p.slopes.resize(m + 1);
  for (std::size_t i = 0; i <= m; ++i) p.slopes[i] = std::tanh(p.rapidity[i]);
  fill_residual(p);
  return p;
}

namespace {

double shoot_end(int n, double c, double eps, double r, double beta0) {
  State s{0.0, beta0};
  odeint::integrate_adaptive(stepper(1e-12), RapiditySystem{n, c}, s, eps, r, 1e-3 * eps);
  return s[0];
}

struct EpsSolution {
  double eps;
  double beta0;
  std::vector<double> values;
  std::vector<double> rapidity;
};

EpsSolution solve_eps_problem(int n, double c, double r, double C, double eps,
                              const std::vector<double>& grid, const BvpOptions& opts) {
  auto f = [&](double b) { return shoot_end(n, c, eps, r, b) - C; };
  double lo = -1.0, hi = 1.0;
  double flo = f(lo), fhi = f(hi);
  while (flo > 0.0 || fhi < 0.0) {
    if (flo > 0.0) {
      lo *= 2.0;
      flo = f(lo);
    }
    if (fhi < 0.0) {
      hi *= 2.0;
      fhi = f(hi);
    }
    if (hi > opts.bracket_max || -lo > opts.bracket_max) {
      std::ostringstream msg;
      msg << "no shooting bracket at eps=" << eps << ": phi(r) in [" << flo + C << ", "
          << fhi + C << "] for initial rapidity in [" << lo << ", " << hi << "], target " << C;
      throw NumericalFailure("bvp shooting", msg.str());
    }
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    double fm = f(mid);
    if (std::abs(fm) < 1e-14) {
      lo = hi = mid;
      break;
    }
    if (fm < 0.0) lo = mid;
    else hi = mid;
  }
  EpsSolution out;
  out.eps = eps;
  out.beta0 = 0.5 * (lo + hi);
  State s{0.0, out.beta0};
  std::vector<double> times(grid.begin() + 1, grid.end());
  times.insert(times.begin(), eps);
  out.values.assign(grid.size(), 0.0);
  out.rapidity.assign(grid.size(), 0.0);
  std::size_t idx = 0;
  odeint::integrate_times(stepper(1e-12), RapiditySystem{n, c}, s, times.begin(), times.end(),
                          1e-3 * eps, [&](const State& st, double) {
                            if (idx > 0) {
                              out.values[idx] = st[0];
                              out.rapidity[idx] = st[1];
                            }
                            ++idx;
                          });
  out.rapidity[0] = out.beta0;
  return out;
}

}  // namespace

RadialProfile solve_bvp(int n, double c, double r, double C, const BvpOptions& opts) {
  if (n < 2) throw std::domain_error("bvp: n must be >= 2");
  if (c < 0) throw std::domain_error("bvp: c must be >= 0");
  if (!(r > 0)) throw std::domain_error("bvp: r must be positive");
  if (!(std::abs(C) < r)) throw std::domain_error("bvp: need |C| < r");
  if (opts.samples < 8 || !(opts.eps_ratio > 1.0)) throw std::domain_error("bvp: bad options");

  RadialProfile p;
  p.n = n;
  p.c = c;
  const int N = opts.samples;
  p.grid.resize(N + 1);
  for (int i = 0; i <= N; ++i) p.grid[i] = r * i / N;
  p.grid.back() = r;

  std::vector<EpsSolution> sols;
  for (double eps = 0.5 * r / N; eps >= opts.eps_min * r; eps /= opts.eps_ratio) {
    sols.push_back(solve_eps_problem(n, c, r, C, eps, p.grid, opts));
  }
  if (sols.size() < 2) throw std::domain_error("bvp: eps schedule too short");
  // phi_eps - phi_0 = O(eps): two-point Richardson on the last pair
  const auto& a = sols[sols.size() - 2];
  const auto& b = sols.back();
  const double k = opts.eps_ratio - 1.0;
  p.values.resize(N + 1);
  p.rapidity.resize(N + 1);
  for (int i = 0; i <= N; ++i) {
    p.values[i] = b.values[i] + (b.values[i] - a.values[i]) / k;
    p.rapidity[i] = b.rapidity[i] + (b.rapidity[i] - a.rapidity[i]) / k;
  }
  p.values[0] = 0.0;
  p.values[N] = C;
  p.rapidity[0] = b.beta0;  // slope at the smallest eps, not a limit
  p.slopes.resize(N + 1);
  for (int i = 0; i <= N; ++i) p.slopes[i] = std::tanh(p.rapidity[i]);
  fill_residual(p);
  return p;
}

BvpSandwich bvp_sandwich(const RadialProfile& phi, double r, double C) {
  const int n = phi.n;
  BvpSandwich s;
  if (C == 0.0) return s;
  s.K = C > 0 ? solve_K1(n, r, C) : solve_K2(n, r, C);
  s.applicable = C > 0 ? r * r <= (n - 1) * C
                       : r < 1.0 && s.K * s.K >= std::pow(r, 2 * n + 2) / (1.0 - r * r);
  s.lower_slack = s.upper_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < phi.grid.size(); ++i) {
    double t = phi.grid[i], v = phi.values[i], line = C * t / r;
    double lo = C > 0 ? line : (t > 0 ? barrier_w_tilde(s.K, n, t) : 0.0);
    double hi = C > 0 ? (t > 0 ? barrier_w(s.K, n, t) : 0.0) : line;
    s.lower_slack = std::min(s.lower_slack, v - lo);
    s.upper_slack = std::min(s.upper_slack, hi - v);
  }
  return s;
}

double normalize_at_infinity(const RadialProfile& p) {
  if (p.r_max() < 50.0) throw std::domain_error("normalize_at_infinity: need r_max >= 50");
  const double R = p.r_max();
  double ra = 0.8 * R, rb = 0.9 * R, rc = R;
  double ga = p.value_at(ra) - ra, gb = p.value_at(rb) - rb, gc = p.value_at(rc) - rc;
  if (std::abs(gc - gb) > 1e-3) {
    std::ostringstream msg;
    msg << "psi(r) - r still moving: " << ga << " -> " << gb << " -> " << gc;
    throw NumericalFailure("normalize_at_infinity", msg.str());
  }
  double d1 = gb - ga, d2 = gc - gb;
  // Aitken delta^2 on the geometric tail; skip once the tail is at rounding level
  if (std::abs(d2) < 1e-12 || std::abs(d2 - d1) < 1e-300) return gc;
  double gamma = gc - d2 * d2 / (d2 - d1);
  if (std::abs(gamma - gc) > std::abs(d2)) return gc;
  return gamma;
}

RadialProfile shifted(RadialProfile p, double gamma) {
  for (double& v : p.values) v -= gamma;
  p.shift += gamma;
  return p;
}

void write_profile_csv(const RadialProfile& p, const std::string& path) {
  std::string out = "# n=" + std::to_string(p.n) + " c=" + format_number(p.c) +
                    " shift=" + format_number(p.shift) + "\n";
  out += "t,value,slope,ode_residual\n";
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    out += format_number(p.grid[i]) + "," + format_number(p.values[i]) + "," +
           format_number(p.slopes[i]) + "," +
           format_number(p.ode_residual.empty() ? 0.0 : p.ode_residual[i]) + "\n";
  }
  write_text_atomic(path, out);
}

}  // namespace soliton
