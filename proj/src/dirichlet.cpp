#include "soliton/dirichlet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "linear.hpp"
#include "soliton/io.hpp"
#include "soliton/numerics.hpp"

namespace soliton {

using detail::Coeff;
using detail::SpMat;
using detail::Vec;

void SolverConfig::validate() const {
  if (!(h > 0)) throw std::invalid_argument("h must be positive");
  if (sigma_schedule.empty() || sigma_schedule.back() != 1.0)
    throw std::invalid_argument("sigma schedule must end at 1");
  for (std::size_t i = 0; i < sigma_schedule.size(); ++i) {
    if (!(sigma_schedule[i] > 0 && sigma_schedule[i] <= 1))
      throw std::invalid_argument("sigma values must lie in (0, 1]");
    if (i > 0 && !(sigma_schedule[i] > sigma_schedule[i - 1]))
      throw std::invalid_argument("sigma schedule must be strictly increasing");
  }
  if (theta_cap && !(*theta_cap > 0 && *theta_cap < 1))
    throw std::invalid_argument("theta_cap must lie in (0, 1)");
  if (!(damping > 0 && damping <= 1)) throw std::invalid_argument("damping must lie in (0, 1]");
  if (!(tolerance > 0)) throw std::invalid_argument("tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
  if (!(linear_tolerance > 0)) throw std::invalid_argument("linear_tolerance must be positive");
  if (!(initial_slope >= 0 && initial_slope < 1)) throw std::invalid_argument("initial_slope must lie in [0, 1)");
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::cap_bound: return "cap-bound";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::not_strict: return "not strictly spacelike at this resolution";
    case SolveStatus::too_large: return "grid too large";
  }
  return "?";
}

namespace {

struct State {
  std::vector<Coeff> coeff;
  Vec R;
  double sup = 0.0, l2 = 0.0, hess = 0.0, gmax = 0.0;
};

// residual and (Picard or Newton) coefficients at every unknown
State evaluate(const GridField& u, double c, double sigma, bool newton) {
  const Grid& G = u.grid();
  const std::size_t n = G.unknowns();
  State s;
  s.coeff.resize(n);
  s.R.resize(static_cast<Eigen::Index>(n));
  double sum2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    LocalJet J = u.jet(int(k));
    double g2 = J.grad2();
    double v2 = 1.0 - g2;
    if (!(v2 > 0)) throw NumericalFailure("dirichlet", "iterate lost spacelikeness");
    double v = std::sqrt(v2);
    Coeff& a = s.coeff[k];
    a.a11 = 1.0 + J.ux * J.ux / v2;
    a.a12 = J.ux * J.uy / v2;
    a.a22 = 1.0 + J.uy * J.uy / v2;
    double Q = J.ux * J.ux * J.uxx + 2 * J.ux * J.uy * J.uxy + J.uy * J.uy * J.uyy;
    double r = J.uxx + J.uyy + Q / v2 - sigma * (1.0 + c * v);
    if (newton) {
      a.b1 = 2 * (J.ux * J.uxx + J.uy * J.uxy) / v2 + 2 * J.ux * Q / (v2 * v2) + sigma * c * J.ux / v;
      a.b2 = 2 * (J.uy * J.uyy + J.ux * J.uxy) / v2 + 2 * J.uy * Q / (v2 * v2) + sigma * c * J.uy / v;
    } else {
      a.b1 = a.b2 = 0.0;
    }
    s.R[Eigen::Index(k)] = r;
    s.sup = std::max(s.sup, std::abs(r));
    sum2 += r * r;
    s.hess = std::max(s.hess, std::sqrt(J.uxx * J.uxx + 2 * J.uxy * J.uxy + J.uyy * J.uyy));
    s.gmax = std::max(s.gmax, std::sqrt(g2));
  }
  s.l2 = std::sqrt(sum2) * G.h();
  return s;
}

// largest t in [0, tmax] with |D(u + t du)| <= cap at every unknown
double cap_step(const GridField& u, const GridField& du, double cap, double tmax) {
  const std::size_t n = u.grid().unknowns();
  double t = tmax;
  for (std::size_t k = 0; k < n; ++k) {
    LocalJet a = u.jet(int(k)), b = du.jet(int(k));
    // |a + t b|^2 = cap^2
    double A = b.ux * b.ux + b.uy * b.uy;
    double B = 2 * (a.ux * b.ux + a.uy * b.uy);
    double C = a.ux * a.ux + a.uy * a.uy - cap * cap;
    auto at = [&](double s) { return (A * s + B) * s + C; };
    if (at(t) <= 0) continue;
    if (C >= 0) return 0.0;
    double disc = std::sqrt(std::max(0.0, B * B - 4 * A * C));
    double root = B >= 0 ? -2 * C / (B + disc) : (-B + disc) / (2 * A);
    t = std::min(t, std::max(0.0, root));
  }
  return t;
}

class Linear {
 public:
  Linear(const std::vector<std::shared_ptr<const Grid>>& levels, std::size_t k, std::size_t direct_limit)
      : grid_(levels[k]) {
    if (grid_->unknowns() > direct_limit && k + 1 < levels.size())
      mg_ = std::make_unique<detail::MultigridSolver>(
          std::vector<std::shared_ptr<const Grid>>(levels.begin() + long(k), levels.end()));
  }
  // solves A x = b with the current coefficients; returns linear iterations
  int solve(const std::vector<Coeff>& coeff, const Vec& b, Vec& x, double tol) {
    detail::assemble(*grid_, coeff, nullptr, A_, nullptr);
    if (!mg_) {
      direct_.factorize(A_);
      direct_.solve(b, x);
      return 1;
    }
    mg_->setup(A_);
    x.setZero(b.size());
    return mg_->solve(b, x, tol);
  }

 private:
  std::shared_ptr<const Grid> grid_;
  SpMat A_;
  detail::DirectSolver direct_;
  std::unique_ptr<detail::MultigridSolver> mg_;
};

GridField from_vector(const GridField& like, const Vec& x) {
  GridField f(like.grid_ptr(), 0.0);
  for (Eigen::Index k = 0; k < x.size(); ++k) f.values()[std::size_t(k)] = x[k];
  return f;
}

struct Iteration {
  SolveStatus status = SolveStatus::diverged;
  std::string message;
};

// Nonlinear iteration on level k at fixed sigma with zero boundary data.
Iteration iterate(const std::vector<std::shared_ptr<const Grid>>& levels, std::size_t k, double c,
                  double sigma, GridField& u, const SolverConfig& cfg, double theta, SolveResult& out,
                  bool warm = false) {
  Linear lin(levels, k, cfg.direct_limit);
  const double cap = 1.0 - theta;
  int increases = 0, capped_run = 0;
  double prev = std::numeric_limits<double>::infinity();
  bool capped = false;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    State st = evaluate(u, c, sigma, false);
    out.residual_sup = st.sup;
    out.residual_l2 = st.l2;
    out.hessian_sup = st.hess;
    out.max_gradient = st.gmax;
    if (st.sup <= cfg.tolerance * (1.0 + st.hess)) {
      if (capped && st.gmax >= cap * (1 - 1e-12)) {
        out.cap_active = true;
        return {SolveStatus::cap_bound, "converged with the gradient cap active"};
      }
      return {SolveStatus::converged, ""};
    }
    // inexact Newton forcing term (Eisenstat-Walker), floored at the linear tolerance
    double eta = std::isfinite(prev) ? 0.5 * (st.sup / prev) * (st.sup / prev) : 1e-2;
    eta = std::clamp(eta, cfg.linear_tolerance, 1e-2);
    if (st.sup > prev) {
      if (++increases >= 5) return {SolveStatus::diverged, "residual increased over 5 successive steps"};
    } else {
      increases = 0;
    }
    prev = st.sup;

    bool newton = cfg.newton_switch > 0 && (warm || st.sup < cfg.newton_switch);
    Vec rhs = -st.R, dx;
    GridField trial;
    double t;
    if (newton) {
      State nt = evaluate(u, c, sigma, true);
      out.linear_iterations += lin.solve(nt.coeff, rhs, dx, eta);
      GridField du = from_vector(u, dx);
      t = cap_step(u, du, cap, 1.0);
      capped = t < 1.0;
      if (capped) t *= 0.5;
      // backtrack on the sup residual
      bool accepted = false;
      for (int ls = 0; ls < 12; ++ls, t *= 0.5) {
        trial = u;
        for (Eigen::Index q = 0; q < dx.size(); ++q) trial.values()[std::size_t(q)] += t * dx[q];
        double r = evaluate(trial, c, sigma, false).sup;
        if (r < st.sup) {
          accepted = true;
          break;
        }
      }
      if (accepted) {
        ++out.newton_steps;
        u = std::move(trial);
        capped_run = capped ? capped_run + 1 : 0;
        continue;
      }
    }
    // damped Picard: A_frozen du = -R
    out.linear_iterations += lin.solve(st.coeff, rhs, dx, cfg.linear_tolerance);
    GridField du = from_vector(u, dx);
    t = cap_step(u, du, cap, cfg.damping);
    capped = t < cfg.damping;
    if (capped) t *= 0.5;
    for (Eigen::Index q = 0; q < dx.size(); ++q) u.values()[std::size_t(q)] += t * dx[q];
    ++out.picard_steps;
    capped_run = capped ? capped_run + 1 : 0;
    if (capped_run >= 25) return {SolveStatus::not_strict, "gradient cap active over 25 successive steps"};
  }
  return {SolveStatus::diverged, "iteration limit reached"};
}

// torsion function (Laplacian 1, zero boundary) scaled to the given maximal slope
GridField initial_guess(const std::vector<std::shared_ptr<const Grid>>& levels, std::size_t k,
                        double slope, std::size_t direct_limit) {
  const auto& grid = levels[k];
  Linear lin(levels, k, direct_limit);
  std::vector<Coeff> id(grid->unknowns());
  Vec ones = Vec::Ones(Eigen::Index(grid->unknowns())), w;
  lin.solve(id, ones, w, 1e-10);
  GridField g = from_vector(GridField(grid, 0.0), w);
  double gmax = 0.0;
  for (std::size_t q = 0; q < grid->unknowns(); ++q) gmax = std::max(gmax, std::sqrt(g.jet(int(q)).grad2()));
  double s = gmax > 0 ? slope / gmax : 0.0;
  for (double& v : g.values()) v *= s;
  return g;
}

// bilinear where the coarse cell is interior; near the boundary u(p) ~ u(q) dist(p) / dist(q)
// for the deepest interior corner q, since ring nodes carry boundary data off the domain
GridField prolong(const GridField& coarse, std::shared_ptr<const Grid> fine) {
  GridField f(fine, 0.0);
  const Grid& F = *fine;
  const Grid& C = coarse.grid();
  const ConvexDomain& dom = F.domain();
  for (std::size_t k = 0; k < F.unknowns(); ++k) {
    std::size_t nd = F.node_of(int(k));
    int i = F.node_i(nd), j = F.node_j(nd);
    int I0 = static_cast<int>(std::floor(i / 2.0)), J0 = static_cast<int>(std::floor(j / 2.0));
    bool inside = true;
    int best = -1;
    double best_d = 0.0;
    for (int b = 0; b <= 1; ++b)
      for (int a = 0; a <= 1; ++a) {
        if ((i - 2 * I0 == 0 && a == 1) || (j - 2 * J0 == 0 && b == 1)) continue;
        int U = C.unknown_at(I0 + a, J0 + b);
        if (U < 0) {
          inside = false;
          continue;
        }
        double d = dom.distance_to_boundary(C.position(I0 + a, J0 + b));
        if (d > best_d) best_d = d, best = U;
      }
    Vec2 p = F.position_of_node(nd);
    if (inside) {
      f.values()[k] = coarse.interpolate(p);
    } else if (best >= 0) {
      f.values()[k] = coarse.value(best) * dom.distance_to_boundary(p) / best_d;
    } else {
      f.values()[k] = 0.0;
    }
  }
  return f;
}

std::vector<std::shared_ptr<const Grid>> hierarchy(std::shared_ptr<const ConvexDomain> dom, double h,
                                                   std::size_t coarse_target) {
  std::vector<std::shared_ptr<const Grid>> levels{std::make_shared<const Grid>(dom, h)};
  while (levels.back()->unknowns() > coarse_target) {
    std::shared_ptr<const Grid> g;
    try {
      g = std::make_shared<const Grid>(dom, levels.back()->h() * 2);
    } catch (const std::invalid_argument&) {
      break;
    }
    if (g->unknowns() < 50) break;
    levels.push_back(std::move(g));
  }
  return levels;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

SolveResult solve_on_grid(std::shared_ptr<const Grid> grid, double c, double sigma, GridField start,
                          const SolverConfig& config) {
  config.validate();
  auto t0 = std::chrono::steady_clock::now();
  SolveResult out;
  double theta = config.theta_cap.value_or(0.5 * (1.0 - std::tanh(grid->domain().diameter())));
  out.theta_cap = theta;
  std::vector<std::shared_ptr<const Grid>> levels{grid};
  while (levels.back()->unknowns() > config.sequencing_start) {
    try {
      levels.push_back(std::make_shared<const Grid>(grid->domain_ptr(), levels.back()->h() * 2));
    } catch (const std::invalid_argument&) {
      break;
    }
  }
  double b = start.boundary_value();
  if (!start.constant_boundary()) throw std::invalid_argument("solve_on_grid needs constant boundary data");
  GridField u(grid, 0.0);
  for (std::size_t k = 0; k < grid->unknowns(); ++k) u.values()[k] = start.value(int(k)) - b;
  auto r = iterate(levels, 0, c, sigma, u, config, theta, out);
  out.status = r.status;
  out.message = r.message;
  if (r.status == SolveStatus::converged) out.sigma_stages.push_back(sigma);
  out.level_spacings.push_back(grid->h());
  u += b;
  out.field = std::move(u);
  out.seconds = elapsed(t0);
  return out;
}

SolveResult solve_dirichlet(std::shared_ptr<const ConvexDomain> domain, double c, double boundary_value,
                            const SolverConfig& config) {
  config.validate();
  if (c < 0) throw std::invalid_argument("c must be nonnegative");
  auto t0 = std::chrono::steady_clock::now();
  SolveResult out;
  double d = domain->diameter();
  double theta = config.theta_cap.value_or(0.5 * (1.0 - std::tanh(d)));
  out.theta_cap = theta;
  if (!(theta > 0)) {
    out.status = SolveStatus::not_strict;
    out.message = "gradient cap (1 - tanh d)/2 underflows for diameter " + std::to_string(d);
    out.seconds = elapsed(t0);
    return out;
  }
  double est = domain->area() / (config.h * config.h);
  if (est > double(config.max_nodes)) {
    out.status = SolveStatus::too_large;
    out.message = "about " + std::to_string(static_cast<long long>(est)) + " unknowns exceeds max_nodes";
    out.seconds = elapsed(t0);
    return out;
  }

  auto levels = hierarchy(domain, config.h, config.sequencing_start);
  std::size_t top = config.grid_sequencing ? levels.size() - 1 : 0;
  GridField u;
  for (std::size_t k = top + 1; k-- > 0;) {
    const auto& g = levels[k];
    GridField start = k == top ? initial_guess(levels, k, config.initial_slope, config.direct_limit)
                               : prolong(u, g);
    if (k != top) {
      // steep boundary layers can prolong to |Du| >= 1; shrink back to the coarse slope
      double gmax = 0.0;
      for (std::size_t q = 0; q < g->unknowns(); ++q) gmax = std::max(gmax, std::sqrt(start.jet(int(q)).grad2()));
      if (gmax > out.max_gradient && gmax >= 1.0 - theta)
        for (double& v : start.values()) v *= out.max_gradient / gmax;
    }
    u = start;
    out.sigma_stages.clear();
    Iteration r;
    try {
      r = iterate(levels, k, c, 1.0, u, config, theta, out, k != top);
    } catch (const NumericalFailure& e) {
      r = {SolveStatus::diverged, e.what()};
    }
    if (r.status == SolveStatus::diverged || r.status == SolveStatus::not_strict) {
      // continuation in sigma from the cold start
      u = start;
      for (double s : config.sigma_schedule) {
        try {
          r = iterate(levels, k, c, s, u, config, theta, out, !out.sigma_stages.empty());
        } catch (const NumericalFailure& e) {
          r = {SolveStatus::diverged, e.what()};
        }
        if (r.status != SolveStatus::converged) {
          r.message += " (sigma = " + format_number(s) + ")";
          break;
        }
        out.sigma_stages.push_back(s);
      }
      if (r.status != SolveStatus::converged && config.newton_switch > 0) {
        // last resort: line-searched Newton from the cold start
        u = start;
        out.sigma_stages.clear();
        std::string picard = r.message;
        try {
          r = iterate(levels, k, c, 1.0, u, config, theta, out, true);
        } catch (const NumericalFailure& e) {
          r = {SolveStatus::diverged, e.what()};
        }
        if (r.status == SolveStatus::converged) {
          out.sigma_stages.push_back(1.0);
          out.message = "Picard continuation failed (" + picard + "); converged with Newton steps";
        } else {
          r.message = picard + "; Newton from the cold start: " + r.message;
        }
      }
    } else if (r.status == SolveStatus::converged) {
      out.sigma_stages.push_back(1.0);
    }
    out.level_spacings.push_back(g->h());
    if (r.status != SolveStatus::converged) {
      out.status = r.status;
      out.message = r.message + " at h = " + std::to_string(g->h());
      u += boundary_value;
      out.field = std::move(u);
      out.seconds = elapsed(t0);
      return out;
    }
  }
  out.status = SolveStatus::converged;
  u += boundary_value;
  out.field = std::move(u);
  out.seconds = elapsed(t0);
  return out;
}

SolveResult solve_dirichlet(const ConvexDomain& domain, double c, double boundary_value,
                            const SolverConfig& config) {
  return solve_dirichlet(std::make_shared<const ConvexDomain>(domain), c, boundary_value, config);
}

}  // namespace soliton
