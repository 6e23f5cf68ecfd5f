#include "soliton/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "soliton/construction.hpp"
#include "soliton/dirichlet.hpp"
#include "soliton/io.hpp"
#include "soliton/profiles.hpp"
#include "soliton/variational.hpp"

namespace soliton {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) { return format_number(round_significant(v, 4)); }

// ---------------------------------------------------------------- 1-D criteria

CriterionResult radial_oracle() {
  CriterionResult r{1, "radial oracle n=1 against log cosh", false, "", 0.0};
  auto t0 = Clock::now();
  RadialProfile p = solve_radial_ivp(1, 0.0, 5.0, 1e-3);
  double err = 0.0;
  for (std::size_t i = 0; i < p.grid.size(); ++i)
    err = std::max(err, std::abs(p.values[i] - std::log(std::cosh(p.grid[i]))));
  r.seconds = seconds_since(t0);
  r.passed = err <= 1e-6 && r.seconds < 1.0;
  r.detail = "sup error " + num(err) + " (limit 1e-06)";
  return r;
}

CriterionResult radial_bounds() {
  CriterionResult r{2, "radial two-sided bounds and slope bound, n=2..5", false, "", 0.0};
  auto t0 = Clock::now();
  double worst = std::numeric_limits<double>::infinity();
  for (int n = 2; n <= 5; ++n) {
    RadialProfile p = solve_radial_ivp(n, 0.0, 50.0, 1e-2);
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
      double t = p.grid[i], d = p.values[i] - p.values[0];
      worst = std::min({worst, d - (t - n), t - d, p.slopes[i] - t / std::sqrt(double(n * n) + t * t)});
    }
  }
  r.seconds = seconds_since(t0);
  r.passed = worst >= -1e-8 && r.seconds < 5.0;
  r.detail = "min slack " + num(worst) + " (limit -1e-08)";
  return r;
}

CriterionResult barrier_identities() {
  CriterionResult r{3, "barrier identities", false, "", 0.0};
  auto t0 = Clock::now();
  std::vector<double> ts;
  for (int i = 0; i <= 490; ++i) ts.push_back(0.1 + 0.01 * i);
  double sw = 0.0, st = 0.0;
  for (double K : {-4.0, -1.0, -0.5, 0.5, 1.0, 4.0})
    for (int n : {2, 3}) {
      auto res = barrier_residuals(K, n, ts);
      sw = std::max(sw, res.sup_w);
      st = std::max(st, res.sup_w_tilde);
    }
  r.seconds = seconds_since(t0);
  r.passed = sw <= 1e-8 && st <= 1e-8 && r.seconds < 5.0;
  r.detail = "sup |L w| " + num(sw) + ", sup |L w~ + K/(t sqrt(t^2n + K^2))| " + num(st);
  return r;
}

CriterionResult bvp_sandwich_check() {
  CriterionResult r{4, "singular BVP sandwiches and eps-schedule agreement", false, "", 0.0};
  auto t0 = Clock::now();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity(), spread = 0.0;
  int cases = 0, inapplicable = 0;
  auto run = [&](int n, double rr, double C) {
    RadialProfile a = solve_bvp(n, 0.0, rr, C);
    BvpOptions o;
    o.eps_ratio = 3.0;
    RadialProfile b = solve_bvp(n, 0.0, rr, C, o);
    for (std::size_t i = 0; i < a.values.size(); ++i) spread = std::max(spread, std::abs(a.values[i] - b.values[i]));
    BvpSandwich s = bvp_sandwich(a, rr, C);
    if (!s.applicable) ++inapplicable;
    worst = std::min({worst, s.lower_slack, s.upper_slack});
    ++cases;
  };
  for (int n : {2, 3}) {
    for (int i = 0; i < 10; ++i) {
      // r^2 <= (n-1) C < (n-1) r
      double rr = 0.1 + 0.85 * U(rng);
      double lo = rr * rr / (n - 1), hi = 0.98 * rr;
      run(n, rr, lo + (hi - lo) * U(rng));
    }
    for (int i = 0; i < 10;) {
      double rr = 0.2 + 0.7 * U(rng);
      double C = -rr * (0.05 + 0.93 * U(rng));
      double K = solve_K2(n, rr, C);
      if (K * K < std::pow(rr, 2 * n + 2) / (1.0 - rr * rr)) continue;
      run(n, rr, C);
      ++i;
    }
  }
  r.seconds = seconds_since(t0);
  r.passed = worst >= -1e-5 && spread <= 1e-5 && inapplicable == 0 && r.seconds < 30.0;
  r.detail = std::to_string(cases) + " cases, min slack " + num(worst) + ", schedule spread " + num(spread);
  return r;
}

CriterionResult curvature_growth() {
  CriterionResult r{12, "mean-curvature growth of the radial soliton", false, "", 0.0};
  auto t0 = Clock::now();
  const double h = 1e-2;
  RadialProfile p = solve_radial_ivp(2, 0.0, 50.0, h);
  auto H = [&](double t) { return p.mean_curvature(static_cast<std::size_t>(std::lround(t / h))); };
  double h1 = H(1), h10 = H(10), h50 = H(50), bound = std::sqrt(4.0 + 2500.0) / 2.0;
  r.seconds = seconds_since(t0);
  r.passed = h1 < h10 && h10 < h50 && h50 >= bound && r.seconds < 1.0;
  r.detail = "H(1) " + num(h1) + ", H(10) " + num(h10) + ", H(50) " + num(h50) + " >= " + num(bound);
  return r;
}

CriterionResult cauchy_schwarz() {
  CriterionResult r{13, "reversed Cauchy-Schwarz over 1e6 triples", false, "", 0.0};
  auto t0 = Clock::now();
  auto a = reversed_cauchy_schwarz_audit(1000000, 13);
  r.seconds = seconds_since(t0);
  r.passed = a.violations == 0 && r.seconds < 5.0;
  r.detail = std::to_string(a.violations) + " violations, worst lhs - rhs " + num(a.worst_gap);
  return r;
}

// ---------------------------------------------------------------- 2-D criteria

std::shared_ptr<const ConvexDomain> ellipse(double a, double b) {
  const int rays = 720;
  std::vector<double> radii(rays), kappa(rays);
  for (int i = 0; i < rays; ++i) {
    double th = 2 * kPi * i / rays;
    radii[i] = a * b / std::hypot(b * std::cos(th), a * std::sin(th));
    double t = std::atan2(a * std::sin(th), b * std::cos(th));
    kappa[i] = a * b / std::pow(a * a * std::sin(t) * std::sin(t) + b * b * std::cos(t) * std::cos(t), 1.5);
  }
  return std::make_shared<const ConvexDomain>(ConvexDomain::radial({}, radii, kappa));
}

struct Solved {
  std::string name;
  double c = 0.0;
  SolveResult res;
};

SolveResult solve(std::shared_ptr<const ConvexDomain> d, double c, double h) {
  SolverConfig cfg;
  cfg.h = h;
  return solve_dirichlet(d, c, 0.0, cfg);
}

// disks of radius 1..3 (curvature 1/R <= 1) and a 2 x 1.5 ellipse (max curvature 8/9)
std::vector<Solved> certified_solves(double h, bool with_ellipse) {
  std::vector<Solved> out;
  for (double R : {1.0, 2.0, 3.0})
    for (double c : {0.0, 1.0})
      out.push_back({"disk R=" + num(R), c, solve(std::make_shared<const ConvexDomain>(ConvexDomain::disk(R)), c, h)});
  if (with_ellipse)
    for (double c : {0.0, 1.0}) out.push_back({"ellipse 2x1.5", c, solve(ellipse(2.0, 1.5), c, h)});
  return out;
}

double radial_error(const GridField& u, double c, double R) {
  RadialProfile psi = solve_radial_ivp(2, c, R + 0.5, 1e-3);
  double psiR = psi.value_at(R), err = 0.0;
  const Grid& G = u.grid();
  for (std::size_t q = 0; q < G.unknowns(); ++q) {
    Vec2 x = G.position_of_node(G.node_of(int(q)));
    err = std::max(err, std::abs(u.value(int(q)) - (psi.value_at(norm(x)) - psiR)));
  }
  return err;
}

CriterionResult cross_validation(bool quick) {
  CriterionResult r{5, "disk solves against the radial oracle", false, "", 0.0};
  auto t0 = Clock::now();
  const double h = quick ? 1.0 / 64 : 1.0 / 128;
  std::ostringstream det;
  bool ok = true;
  double worst_scaled = 0.0, rmin = 1e300, rmax = 0.0, tmax = 0.0;
  for (double R : {1.0, 2.0, 3.0}) {
    for (double c : {0.0, 1.0}) {
      auto d = std::make_shared<const ConvexDomain>(ConvexDomain::disk(R));
      SolveResult a = solve(d, c, h), b = solve(d, c, h / 2);
      tmax = std::max({tmax, a.seconds, b.seconds});
      if (!a.ok() || !b.ok()) {
        ok = false;
        det << "R=" << R << " c=" << c << " not converged (" << to_string(a.ok() ? b.status : a.status) << "); ";
        continue;
      }
      double ea = radial_error(a.field, c, R), eb = radial_error(b.field, c, R);
      double ratio = ea / eb;
      worst_scaled = std::max(worst_scaled, ea / (h * h));
      rmin = std::min(rmin, ratio);
      rmax = std::max(rmax, ratio);
      if (ea > 5 * h * h || ratio < 3 || ratio > 5) ok = false;
    }
  }
  r.seconds = seconds_since(t0);
  r.passed = ok && tmax < 60.0;
  det << "h=1/" << int(std::lround(1 / h)) << ": max err/h^2 " << num(worst_scaled) << " (limit 5), ratios in ["
      << num(rmin) << ", " << num(rmax) << "], slowest solve " << num(tmax) << " s";
  r.detail = det.str();
  return r;
}

CriterionResult gradient_criterion(bool quick) {
  CriterionResult r{6, "gradient bound and interior gradient maximum principle", false, "", 0.0};
  auto t0 = Clock::now();
  const double h = quick ? 1.0 / 64 : 1.0 / 128;
  auto solves = certified_solves(h, true);
  bool ok = true;
  double worst = -1e300;
  std::ostringstream det;
  for (auto& s : solves) {
    if (!s.res.ok()) {
      ok = false;
      det << s.name << " c=" << s.c << " not converged; ";
      continue;
    }
    auto g = gradient_certificate(s.res.field);
    worst = std::max(worst, g.max_gradient - g.bound);
    if (!g.passed()) {
      ok = false;
      det << s.name << " c=" << s.c << (g.bound_ok ? " max principle fails" : " bound fails") << "; ";
    }
  }
  r.seconds = seconds_since(t0);
  r.passed = ok;
  det << solves.size() << " solves, max (|Du| - tanh d) " << num(worst);
  r.detail = det.str();
  return r;
}

CriterionResult convexity_criterion(bool quick) {
  CriterionResult r{7, "convexity on domains with boundary curvature <= 1", false, "", 0.0};
  auto t0 = Clock::now();
  const double h = quick ? 1.0 / 64 : 1.0 / 128;
  auto solves = certified_solves(h, true);
  bool ok = true;
  double worst = 1e300;
  std::ostringstream det;
  for (auto& s : solves) {
    if (s.res.field.grid().domain().max_curvature() > 1.0) continue;
    if (!s.res.ok()) {
      ok = false;
      det << s.name << " c=" << s.c << " not converged; ";
      continue;
    }
    auto cc = convexity_certificate(s.res.field);
    worst = std::min(worst, cc.min_eigenvalue);
    if (!cc.passed) ok = false;
  }
  r.seconds = seconds_since(t0);
  r.passed = ok;
  det << "min Hessian eigenvalue " << num(worst) << " (limit -" << num(10 * h) << ")";
  r.detail = det.str();
  return r;
}

CriterionResult level_set_criterion(bool quick) {
  CriterionResult r{8, "level-set identity and induced Laplacian", false, "", 0.0};
  auto t0 = Clock::now();
  const double h = quick ? 1.0 / 64 : 1.0 / 128;
  bool ok = true;
  double lev = 0.0, lap = 0.0;
  std::size_t samples = 0;
  std::ostringstream det;
  for (auto d : {std::make_shared<const ConvexDomain>(ConvexDomain::disk(2.0)), ellipse(2.0, 1.5)}) {
    for (double c : {0.0, 1.0}) {
      SolveResult s = solve(d, c, h);
      if (!s.ok()) {
        ok = false;
        det << "solve failed; ";
        continue;
      }
      double umin = *std::min_element(s.field.values().begin(), s.field.values().end());
      for (double f : {0.25, 0.5, 0.75}) {
        auto rep = level_set_identity(s.field, f * umin, c);
        lev = std::max(lev, rep.sup_residual);
        samples += rep.samples;
      }
      lap = std::max(lap, induced_laplacian_check(s.field, c).sup_residual);
    }
  }
  r.seconds = seconds_since(t0);
  r.passed = ok && samples > 0 && lev <= 0.1 && lap <= 0.1;
  det << samples << " level-curve samples, sup residual " << num(lev) << "; Laplacian sup residual " << num(lap);
  r.detail = det.str();
  return r;
}

CriterionResult maximality_criterion(bool quick, int jobs) {
  CriterionResult r{9, "maximality audit on the radius-2 disk", false, "", 0.0};
  auto t0 = Clock::now();
  const int trials = quick ? 50 : 200;
  bool ok = true;
  std::ostringstream det;
  for (double c : {0.0, 1.0}) {
    SolveResult s = solve(std::make_shared<const ConvexDomain>(ConvexDomain::disk(2.0)), c, 1.0 / 64);
    if (!s.ok()) {
      ok = false;
      det << "c=" << c << " solve failed; ";
      continue;
    }
    auto rep = maximality_test(s.field, trials, 9, c, jobs);
    ok = ok && rep.passed && rep.skipped == 0;
    det << "c=" << c << ": worst margin " << num(rep.worst_margin) << " (limit " << num(rep.tolerance)
        << "), spike " << num(rep.spike_margin) << ", skipped " << rep.skipped << "; ";
  }
  r.seconds = seconds_since(t0);
  r.passed = ok && r.seconds < 60.0;
  det << trials << " trials per c";
  r.detail = det.str();
  return r;
}

CriterionResult construction_criterion(int jobs) {
  CriterionResult r{10, "cone construction sandwich and blow-down", false, "", 0.0};
  auto t0 = Clock::now();
  ConstructionConfig cfg;
  cfg.solver.h = 1.0 / 64;
  cfg.jobs = jobs;
  auto data = AsymptoticData::cone({{1, 0}, {-1, 0}}, 5.0);
  ConstructionRun run = construct_blowdown(data, 0.0, {20, 30, 40}, cfg);
  std::ostringstream det;
  bool ok = run.passed;
  if (ok) {
    std::vector<Vec2> dirs;
    for (int i = 0; i < 8; ++i) dirs.push_back(unit_at(i * kPi / 4));
    auto b = blowdown_ratio(run, {15.0}, dirs);
    double eps = run.levels.back().epsilon;
    double bound = (2 + 2 * eps) / 15 + 10 * cfg.solver.h;
    ok = b.skipped == 0 && b.sup_deviation <= bound;
    det << "blow-down deviation " << num(b.sup_deviation) << " (limit " << num(bound) << ")";
  } else {
    det << "failed: " << run.failed_stage;
  }
  r.seconds = seconds_since(t0);
  r.passed = ok && r.seconds < 600.0;
  r.detail = det.str();
  return r;
}

CriterionResult c2_criterion(int jobs) {
  CriterionResult r{11, "C2 sphere data construction", false, "", 0.0};
  auto t0 = Clock::now();
  ConstructionConfig cfg;
  cfg.solver.h = 1.0 / 64;
  cfg.jobs = jobs;
  auto data = AsymptoticData::sphere([](double t) { return 0.1 * std::cos(t); },
                                     [](double t) { return -0.1 * std::sin(t); },
                                     [](double t) { return -0.1 * std::cos(t); });
  ConstructionRun run = construct_c2_data(data, {20, 30}, cfg);
  r.seconds = seconds_since(t0);
  r.passed = run.passed && r.seconds < 600.0;
  if (run.passed) {
    double gap = 0.0;
    for (auto& L : run.levels) gap = std::max(gap, L.gap_estimate);
    r.detail = "all levels certified, observed gap s " + num(gap);
  } else {
    r.detail = "failed: " + run.failed_stage;
  }
  return r;
}

}  // namespace

CriterionResult run_criterion(int id, bool quick, int jobs) {
  if (id < 1 || id > kCriteria) throw std::invalid_argument("no criterion " + std::to_string(id));
  auto t0 = Clock::now();
  CriterionResult r;
  try {
    switch (id) {
      case 1: r = radial_oracle(); break;
      case 2: r = radial_bounds(); break;
      case 3: r = barrier_identities(); break;
      case 4: r = bvp_sandwich_check(); break;
      case 5: r = cross_validation(quick); break;
      case 6: r = gradient_criterion(quick); break;
      case 7: r = convexity_criterion(quick); break;
      case 8: r = level_set_criterion(quick); break;
      case 9: r = maximality_criterion(quick, jobs); break;
      case 10: r = construction_criterion(jobs); break;
      case 11: r = c2_criterion(jobs); break;
      case 12: r = curvature_growth(); break;
      case 13: r = cauchy_schwarz(); break;
    }
  } catch (const std::exception& e) {
    r.id = id;
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
    r.seconds = seconds_since(t0);
  }
  return r;
}

std::vector<CriterionResult> run_acceptance(bool quick, int jobs,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= kCriteria; ++id) {
    out.push_back(run_criterion(id, quick, jobs));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "criterion %2d %s ", r.id, r.passed ? "PASS" : "FAIL");
  std::ostringstream s;
  s << head << r.title << " (" << format_number(round_significant(r.seconds, 3)) << " s): " << r.detail;
  return s.str();
}

}  // namespace soliton
