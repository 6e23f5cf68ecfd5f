#include "soliton/construction.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "soliton/io.hpp"

namespace soliton {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double angle_of(Vec2 x) {
  double t = std::atan2(x.y, x.x);
  return t < 0 ? t + 2.0 * kPi : t;
}

std::string at_k(const std::string& stage, double k) { return stage + " at k=" + format_number(k); }

// runs body(i) for i in [0, n) on up to 'jobs' threads
template <class F>
void parallel_for(std::size_t n, int jobs, F body) {
  std::size_t workers = std::min<std::size_t>(std::max(1, jobs), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

// psi with psi(0) = 0, continued with slope 1 past the sampled range
struct RawProfile {
  RadialProfile p;
  double operator()(double r) const {
    if (r <= p.r_max()) return p.value_at(r);
    return p.values.back() + (r - p.r_max());
  }
};

std::vector<Vec2> probe_grid(double half, int m) {
  std::vector<Vec2> out;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i)
      out.push_back({-half + 2.0 * half * i / (m - 1), -half + 2.0 * half * j / (m - 1)});
  return out;
}

double min_radius(const ConvexDomain& d) {
  double r = kInf;
  for (Vec2 p : d.boundary_samples()) r = std::min(r, norm(p - d.center()));
  return r;
}

void solve_level(LevelResult& L, double c, const ConstructionConfig& cfg) {
  L.solve = solve_dirichlet(L.domain, c, 0.0, cfg.solver);
  if (!L.solve.ok()) {
    L.failure = at_k("solve", L.k) + ": " + to_string(L.solve.status) +
                (L.solve.message.empty() ? "" : " (" + L.solve.message + ")");
    return;
  }
  L.solve.field += L.k;
  L.gradient = gradient_certificate(L.solve.field);
  L.convexity = convexity_certificate(L.solve.field);
  if (!L.gradient.passed()) {
    L.failure = at_k("gradient certificate", L.k);
  } else if (!L.convexity.passed) {
    L.failure = at_k("convexity certificate", L.k);
  }
}

bool check_nested(const std::vector<LevelResult>& levels) {
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    for (Vec2 p : levels[i].domain->boundary_samples())
      if (!levels[i + 1].domain->contains(p)) return false;
  }
  return true;
}

void finish_run(ConstructionRun& run, const ConstructionConfig& cfg) {
  run.nested = check_nested(run.levels);
  run.cauchy_tolerance = 10.0 * run.tolerance;
  run.cauchy_gap = 0.0;
  if (run.levels.size() >= 2) {
    const auto& a = run.levels[run.levels.size() - 2].probe_values;
    const auto& b = run.levels.back().probe_values;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::isfinite(a[i]) && std::isfinite(b[i])) run.cauchy_gap = std::max(run.cauchy_gap, std::abs(a[i] - b[i]));
  }
  run.passed = true;
  for (auto& L : run.levels) {
    if (!L.passed) {
      run.passed = false;
      run.failed_stage = L.failure;
      return;
    }
  }
  if (!run.nested) {
    run.passed = false;
    run.failed_stage = "nesting";
  } else if (run.cauchy_gap > run.cauchy_tolerance) {
    run.passed = false;
    run.failed_stage = "cauchy at k=" + format_number(run.k_list.back());
  }
  (void)cfg;
}

void sample_probes(LevelResult& L, const std::vector<Vec2>& probes, double h) {
  L.probe_values.assign(probes.size(), kNaN);
  for (std::size_t i = 0; i < probes.size(); ++i)
    if (L.domain->contains(probes[i], 2.0 * h)) L.probe_values[i] = L.solve.field.interpolate(probes[i]);
}

std::vector<double> sorted_levels(std::vector<double> k_list) {
  if (k_list.empty()) throw std::invalid_argument("k list is empty");
  std::sort(k_list.begin(), k_list.end());
  for (std::size_t i = 1; i < k_list.size(); ++i)
    if (!(k_list[i] > k_list[i - 1])) throw std::invalid_argument("k values must be distinct");
  return k_list;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void ConstructionConfig::validate() const {
  solver.validate();
  if (eps_start && !(*eps_start > 0)) throw std::invalid_argument("eps_start must be positive");
  if (!(eps0 > 0)) throw std::invalid_argument("eps0 must be positive");
  if (!(r_min > 0)) throw std::invalid_argument("r_min must be positive");
  if (rays < 16) throw std::invalid_argument("rays must be at least 16");
  if (probe_per_axis < 2) throw std::invalid_argument("probe_per_axis must be at least 2");
  if (!(probe_fraction > 0 && probe_fraction < 1)) throw std::invalid_argument("probe_fraction must lie in (0, 1)");
  if (upper_samples < 2) throw std::invalid_argument("upper_samples must be at least 2");
  if (!(tolerance_factor >= 0)) throw std::invalid_argument("tolerance_factor must be nonnegative");
  if (sandwich_n < 1) throw std::invalid_argument("sandwich_n must be positive");
  if (jobs < 1) throw std::invalid_argument("jobs must be positive");
}

// ---------------------------------------------------------------- cone data

ConstructionRun construct_blowdown(const AsymptoticData& data, double c, std::vector<double> k_list,
                                   const ConstructionConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.mode != AsymptoticData::Mode::cone) throw std::invalid_argument("construct_blowdown: cone data expected");
  if (data.directions.size() < 2) throw std::invalid_argument("construct_blowdown: need at least two directions");
  if (!(data.K > 0)) throw std::invalid_argument("construct_blowdown: K must be positive");
  auto t0 = std::chrono::steady_clock::now();
  ConstructionRun run;
  run.data = data;
  run.c = c;
  run.k_list = sorted_levels(std::move(k_list));
  run.tolerance = cfg.tolerance_factor * cfg.solver.h;
  const double h = cfg.solver.h;

  // one eps for every level so the domains are sublevel sets of one field
  double eps = 0.0;
  for (double k : run.k_list) {
    try {
      eps = std::max(eps, choose_epsilon(data, k, cfg.eps_start).epsilon);
    } catch (const NumericalFailure& e) {
      run.failed_stage = at_k("epsilon", k) + ": " + e.what();
      run.seconds = elapsed(t0);
      return run;
    }
  }
  auto base = truncated_cone_field(data);
  MollifiedField field(base, eps);
  for (double k : run.k_list) {
    LevelResult L;
    L.k = k;
    L.epsilon = eps;
    try {
      ConvexDomain d = sublevel_domain(field, k, cfg.rays);
      d.epsilon = eps;
      L.max_curvature = d.max_curvature();
      L.domain = std::make_shared<const ConvexDomain>(std::move(d));
    } catch (const NumericalFailure& e) {
      run.failed_stage = at_k("domain", k) + ": " + e.what();
      run.seconds = elapsed(t0);
      return run;
    }
    if (L.max_curvature > 1.0) {
      run.failed_stage = at_k("curvature", k) + ": max kappa " + format_number(L.max_curvature);
      run.seconds = elapsed(t0);
      return run;
    }
    run.levels.push_back(std::move(L));
  }

  run.probes = probe_grid(cfg.probe_fraction * min_radius(*run.levels.front().domain), cfg.probe_per_axis);
  double reach = 0.0;
  for (Vec2 p : run.levels.back().domain->boundary_samples()) reach = std::max(reach, norm(p));
  RawProfile psi{solve_radial_ivp(2, c, 3.0 * reach + 1.0, 1e-2)};
  const auto& lambda = data.directions;
  const double K = data.K;
  const double n = cfg.sandwich_n;

  parallel_for(run.levels.size(), cfg.jobs, [&](std::size_t li) {
    LevelResult& L = run.levels[li];
    try {
      solve_level(L, c, cfg);
    } catch (const std::exception& e) {
      L.failure = at_k("solve", L.k) + ": " + e.what();
    }
    if (!L.solve.ok()) return;
    const GridField& u = L.solve.field;
    const Grid& G = u.grid();
    L.lower_margin = L.upper_margin = L.barrier_margin = kInf;
    for (std::size_t q = 0; q < G.unknowns(); ++q) {
      Vec2 x = G.position_of_node(G.node_of(static_cast<int>(q)));
      double val = u.value(static_cast<int>(q));
      double vt = eval_truncated_cone(lambda, K, x);
      L.lower_margin = std::min(L.lower_margin, val - (vt - eps));
      L.upper_margin = std::min(L.upper_margin, vt + n + eps - val);
      for (Vec2 l : lambda) L.barrier_margin = std::min(L.barrier_margin, val - dot(l, x) + eps);
    }
    sample_probes(L, run.probes, h);
    // inf over y of V~(y) + psi(|x - y|), y on a grid over the domain's box and y = x
    L.inf_conv_margin = kInf;
    const int m = cfg.upper_samples;
    for (std::size_t i = 0; i < run.probes.size(); ++i) {
      if (!std::isfinite(L.probe_values[i])) continue;
      Vec2 x = run.probes[i];
      double best = eval_truncated_cone(lambda, K, x) + psi(0.0);
      for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
          Vec2 y{-reach + 2.0 * reach * a / (m - 1), -reach + 2.0 * reach * b / (m - 1)};
          best = std::min(best, eval_truncated_cone(lambda, K, y) + psi(norm(x - y)));
        }
      }
      L.inf_conv_margin = std::min(L.inf_conv_margin, best + n + eps - L.probe_values[i]);
    }
    double tol = run.tolerance;
    if (L.lower_margin < -tol) {
      L.failure = at_k("lower sandwich", L.k) + ": margin " + format_number(L.lower_margin);
    } else if (L.upper_margin < -tol) {
      L.failure = at_k("upper sandwich", L.k) + ": margin " + format_number(L.upper_margin);
    } else if (L.barrier_margin < -tol) {
      L.failure = at_k("linear barrier", L.k) + ": margin " + format_number(L.barrier_margin);
    } else if (L.inf_conv_margin < -tol) {
      L.failure = at_k("inf-convolution barrier", L.k) + ": margin " + format_number(L.inf_conv_margin);
    }
    L.passed = L.failure.empty();
  });
  finish_run(run, cfg);
  run.seconds = elapsed(t0);
  return run;
}

BlowdownReport blowdown_ratio(const ConstructionRun& run, const std::vector<double>& radii,
                              const std::vector<Vec2>& directions) {
  if (run.levels.empty() || !run.levels.back().solve.ok())
    throw std::invalid_argument("blowdown_ratio: run has no solved level");
  const LevelResult& L = run.levels.back();
  const GridField& u = L.solve.field;
  double h = u.grid().h();
  BlowdownReport rep;
  for (double r : radii) {
    for (Vec2 d : directions) {
      BlowdownSample s;
      s.r = r;
      s.direction = d / norm(d);
      Vec2 x = s.direction * r;
      double val = L.domain->contains(x, 2.0 * h) ? u.interpolate(x) : kNaN;
      if (!std::isfinite(val)) {
        s.skipped = true;
        ++rep.skipped;
      } else {
        double V = run.data.mode == AsymptoticData::Mode::cone ? eval_cone(run.data.directions, s.direction) : 1.0;
        s.value = val / r;
        s.deviation = std::abs(s.value - V);
        rep.sup_deviation = std::max(rep.sup_deviation, s.deviation);
      }
      rep.samples.push_back(s);
    }
  }
  return rep;
}

// ---------------------------------------------------------------- sphere data

NormalizedProfile::NormalizedProfile(int n, double c, double r_max, double h) {
  RadialProfile raw = solve_radial_ivp(n, c, r_max, h);
  profile_ = shifted(raw, normalize_at_infinity(raw));
  tail_ = profile_.values.back() - profile_.r_max();
}

double NormalizedProfile::operator()(double r) const {
  if (r <= profile_.r_max()) return profile_.value_at(r);
  return r + tail_ * profile_.r_max() / r;
}

double support_violation(const AsymptoticData& f, const SupportFields& p, std::size_t* wi, std::size_t* wj) {
  const std::size_t N = p.theta.size();
  std::vector<double> fv(N);
  std::vector<Vec2> e(N);
  for (std::size_t i = 0; i < N; ++i) {
    fv[i] = f.f_at(p.theta[i]);
    e[i] = unit_at(p.theta[i]);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      Vec2 d = e[j] - e[i];
      double df = fv[j] - fv[i];
      double s = std::min(df - dot(p.p1[i], d), dot(p.p2[i], d) - df);
      if (s < worst) {
        worst = s;
        if (wi) *wi = i;
        if (wj) *wj = j;
      }
    }
  }
  return worst;
}

SupportFields support_fields(const AsymptoticData& f, int samples) {
  if (f.mode != AsymptoticData::Mode::sphere_data) throw std::invalid_argument("support_fields: sphere data expected");
  if (samples < 8) throw std::invalid_argument("support_fields: too few samples");
  SupportFields p;
  p.theta.resize(samples);
  for (int i = 0; i < samples; ++i) p.theta[i] = 2.0 * kPi * i / samples;
  const double round_off = 1e-13;
  for (int j = -1; j < 40; ++j) {
    p.lambda = j < 0 ? 0.0 : 1e-3 * std::ldexp(1.0, j);
    p.p1.resize(samples);
    p.p2.resize(samples);
    for (int i = 0; i < samples; ++i) {
      Vec2 eta = unit_at(p.theta[i]), tau{-eta.y, eta.x};
      Vec2 t = tau * f.df_at(p.theta[i]);
      p.p1[i] = t + eta * p.lambda;
      p.p2[i] = t - eta * p.lambda;
    }
    p.worst_violation = support_violation(f, p, &p.worst_i, &p.worst_j);
    if (p.worst_violation >= -round_off) return p;
  }
  throw NumericalFailure("q_bounds", "support inequality fails for every lambda; worst pair (" +
                                         format_number(p.theta[p.worst_i]) + ", " +
                                         format_number(p.theta[p.worst_j]) + ") slack " +
                                         format_number(p.worst_violation));
}

QBounds q_bounds(const AsymptoticData& f, const SupportFields& p, const NormalizedProfile& psi, Vec2 x) {
  QBounds q{-kInf, kInf};
  for (std::size_t i = 0; i < p.theta.size(); ++i) {
    Vec2 eta = unit_at(p.theta[i]);
    double fi = f.f_at(p.theta[i]);
    q.q1 = std::max(q.q1, fi - dot(p.p1[i], eta) + psi(norm(x + p.p1[i])));
    q.q2 = std::min(q.q2, fi - dot(p.p2[i], eta) + psi(norm(x + p.p2[i])));
  }
  return q;
}

ConstructionRun construct_c2_data(const AsymptoticData& data, std::vector<double> k_list,
                                  const ConstructionConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.mode != AsymptoticData::Mode::sphere_data)
    throw std::invalid_argument("construct_c2_data: sphere data expected");
  auto t0 = std::chrono::steady_clock::now();
  ConstructionRun run;
  run.data = data;
  run.c = 0.0;
  run.k_list = sorted_levels(std::move(k_list));
  run.tolerance = cfg.tolerance_factor * cfg.solver.h;
  const double h = cfg.solver.h;
  auto base = sphere_data_field(data, cfg.r_min);

  // eps_k = min(eps0, 10 / k), halved until the boundary curvature is at most 1, never increasing in k
  double prev = kInf;
  for (double k : run.k_list) {
    LevelResult L;
    L.k = k;
    std::string last;
    double e = std::min({cfg.eps0, 10.0 / k, prev});
    for (int j = 0; j < 4 && !L.domain; ++j, e *= 0.5) {
      try {
        MollifiedField field(base, e);
        ConvexDomain d = sublevel_domain(field, k, cfg.rays);
        d.epsilon = e;
        if (d.max_curvature() <= 1.0 && d.min_curvature() >= -1e-9) {
          L.epsilon = e;
          L.max_curvature = d.max_curvature();
          L.domain = std::make_shared<const ConvexDomain>(std::move(d));
        } else {
          last = "kappa in [" + format_number(d.min_curvature()) + ", " + format_number(d.max_curvature()) + "]";
        }
      } catch (const NumericalFailure& ex) {
        last = ex.what();
      }
    }
    if (!L.domain) {
      run.failed_stage = at_k("curvature", k) + ": no tested eps_k works (" + last + ")";
      run.seconds = elapsed(t0);
      return run;
    }
    prev = L.epsilon;
    run.levels.push_back(std::move(L));
  }

  SupportFields P;
  try {
    P = support_fields(data);
  } catch (const NumericalFailure& e) {
    run.failed_stage = e.what();
    run.seconds = elapsed(t0);
    return run;
  }
  double reach = 0.0;
  for (Vec2 p : run.levels.back().domain->boundary_samples()) reach = std::max(reach, norm(p));
  NormalizedProfile psi(2, 0.0, std::max(200.0, 2.0 * reach));
  run.probes = probe_grid(cfg.probe_fraction * min_radius(*run.levels.front().domain), cfg.probe_per_axis);
  auto deviation = [&](Vec2 x, double val) { return std::abs(val - norm(x) - data.f_at(angle_of(x))); };

  parallel_for(run.levels.size(), cfg.jobs, [&](std::size_t li) {
    LevelResult& L = run.levels[li];
    try {
      solve_level(L, 0.0, cfg);
    } catch (const std::exception& e) {
      L.failure = at_k("solve", L.k) + ": " + e.what();
    }
    if (!L.solve.ok()) return;
    const GridField& u = L.solve.field;
    const Grid& G = u.grid();

    L.boundary_deviation = 0.0;
    L.gap_estimate = 0.0;
    for (Vec2 x : L.domain->boundary_samples()) {
      L.boundary_deviation = std::max(L.boundary_deviation, deviation(x, L.k));
      QBounds q = q_bounds(data, P, psi, x);
      double r = norm(x), fx = data.f_at(angle_of(x));
      L.gap_estimate = std::max({L.gap_estimate, q.q1 - r - fx, r + fx - q.q2});
    }

    // nested annuli [r1, r2] with r2 just inside the boundary
    double r2 = min_radius(*L.domain) - 2.0 * h;
    const int rings = 8;
    L.annulus_radii.clear();
    L.annulus_deviation.assign(rings - 1, 0.0);
    for (int a = 1; a < rings; ++a) L.annulus_radii.push_back(r2 * a / rings);
    for (std::size_t q = 0; q < G.unknowns(); ++q) {
      Vec2 x = G.position_of_node(G.node_of(static_cast<int>(q)));
      double r = norm(x);
      if (r > r2) continue;
      double dv = deviation(x, u.value(static_cast<int>(q)));
      for (int a = 0; a < rings - 1; ++a)
        if (r >= L.annulus_radii[a]) L.annulus_deviation[a] = std::max(L.annulus_deviation[a], dv);
    }

    sample_probes(L, run.probes, h);
    L.q_lower_margin = L.q_upper_margin = kInf;
    bool ordered = true;
    for (std::size_t i = 0; i < run.probes.size(); ++i) {
      if (!std::isfinite(L.probe_values[i])) continue;
      QBounds q = q_bounds(data, P, psi, run.probes[i]);
      if (q.q1 > q.q2 + 1e-12) ordered = false;
      L.q_lower_margin = std::min(L.q_lower_margin, L.probe_values[i] - (q.q1 - L.gap_estimate - L.epsilon));
      L.q_upper_margin = std::min(L.q_upper_margin, q.q2 + L.gap_estimate + L.epsilon - L.probe_values[i]);
    }

    double tol = run.tolerance;
    bool monotone = std::is_sorted(L.annulus_deviation.rbegin(), L.annulus_deviation.rend());
    if (L.boundary_deviation > L.epsilon) {
      L.failure = at_k("boundary deviation", L.k) + ": " + format_number(L.boundary_deviation);
    } else if (!monotone) {
      L.failure = at_k("annulus monotonicity", L.k);
    } else if (!ordered) {
      L.failure = at_k("q_bounds", L.k) + ": q1 > q2 at a probe";
    } else if (L.q_lower_margin < -tol || L.q_upper_margin < -tol) {
      L.failure = at_k("q sandwich", L.k) + ": margins " + format_number(L.q_lower_margin) + ", " +
                  format_number(L.q_upper_margin);
    }
    L.passed = L.failure.empty();
  });
  finish_run(run, cfg);
  run.seconds = elapsed(t0);
  return run;
}

}  // namespace soliton
