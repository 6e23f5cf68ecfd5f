#include "soliton/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "soliton/numerics.hpp"

namespace soliton {

CellQuadrature::CellQuadrature(const Grid& G, int sub) {
  const double h = G.h();
  const ConvexDomain& dom = G.domain();
  auto has_value = [&](int i, int j) {
    if (!G.in_box(i, j)) return false;
    return G.kind(G.node(i, j)) != NodeKind::exterior;
  };
  for (int j = -G.mj(); j < G.mj(); ++j) {
    for (int i = -G.mi(); i < G.mi(); ++i) {
      if (!has_value(i, j) || !has_value(i + 1, j) || !has_value(i, j + 1) || !has_value(i + 1, j + 1)) continue;
      Cell c;
      c.nodes = {G.node(i, j), G.node(i + 1, j), G.node(i, j + 1), G.node(i + 1, j + 1)};
      c.mid = G.position(i, j) + Vec2{0.5 * h, 0.5 * h};
      bool all_in = true;
      for (auto n : c.nodes) all_in = all_in && G.kind(n) == NodeKind::interior;
      if (all_in) {
        c.weight = h * h;
      } else {
        int inside = 0;
        for (int b = 0; b < sub; ++b)
          for (int a = 0; a < sub; ++a)
            if (dom.contains(G.position(i, j) + Vec2{(a + 0.5) * h / sub, (b + 0.5) * h / sub})) ++inside;
        c.weight = h * h * inside / double(sub * sub);
      }
      if (c.weight > 0) cells_.push_back(c);
    }
  }
}

double CellQuadrature::area() const {
  double a = 0.0;
  for (const auto& c : cells_) a += c.weight;
  return a;
}

namespace {

struct CellJet {
  double m, gx, gy;
};

CellJet cell_jet(const GridField& w, const CellQuadrature::Cell& c, double h) {
  double w00 = w.node_value(c.nodes[0]), w10 = w.node_value(c.nodes[1]);
  double w01 = w.node_value(c.nodes[2]), w11 = w.node_value(c.nodes[3]);
  return {0.25 * (w00 + w10 + w01 + w11), (w10 + w11 - w00 - w01) / (2 * h), (w01 + w11 - w00 - w10) / (2 * h)};
}

}  // namespace

FunctionalValue functional_F(const GridField& w, const Weight& W, const CellQuadrature& q) {
  const double h = w.grid().h();
  FunctionalValue out;
  for (const auto& c : q.cells()) {
    CellJet J = cell_jet(w, c, h);
    double g2 = J.gx * J.gx + J.gy * J.gy;
    out.max_gradient = std::max(out.max_gradient, std::sqrt(g2));
    double s = 0.0;
    if (g2 < 1.0) s = std::sqrt(1.0 - g2);
    else if (g2 > 1.0 + 1e-12) ++out.clamped;
    out.value += c.weight * std::exp(-J.m) * (s + W.at(c.mid));
  }
  return out;
}

FunctionalValue functional_F(const GridField& w, const Weight& W) {
  return functional_F(w, W, CellQuadrature(w.grid()));
}

FirstVariation first_variation(const GridField& u, const std::function<double(Vec2)>& eta, const Weight& W) {
  const Grid& G = u.grid();
  const double h = G.h();
  CellQuadrature q(G);
  GridField e(u.grid_ptr(), 0.0);
  FirstVariation out;
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    e.values()[k] = eta(G.position_of_node(G.node_of(int(k))));
    out.eta_norm = std::max(out.eta_norm, std::abs(e.values()[k]));
  }
  // the perturbation lives on the unknowns only
  auto eta_node = [&](std::size_t n) {
    int k = G.unknown(n);
    return k >= 0 ? e.values()[k] : 0.0;
  };
  for (const auto& c : q.cells()) {
    CellJet J = cell_jet(u, c, h);
    double e00 = eta_node(c.nodes[0]), e10 = eta_node(c.nodes[1]);
    double e01 = eta_node(c.nodes[2]), e11 = eta_node(c.nodes[3]);
    double em = 0.25 * (e00 + e10 + e01 + e11);
    double ex = (e10 + e11 - e00 - e01) / (2 * h), ey = (e01 + e11 - e00 - e10) / (2 * h);
    double g2 = J.gx * J.gx + J.gy * J.gy;
    if (!(g2 < 1.0)) continue;
    double s = std::sqrt(1 - g2);
    out.weak += c.weight * std::exp(-J.m) * (-em * (s + W.at(c.mid)) - (J.gx * ex + J.gy * ey) / s);
  }
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    double ek = e.values()[k];
    if (ek == 0.0) continue;
    LocalJet J = u.jet(int(k));
    double v2 = 1 - J.grad2();
    if (!(v2 > 0)) throw NumericalFailure("first variation", "field is not strictly spacelike");
    double v = std::sqrt(v2);
    double Q = J.ux * J.ux * J.uxx + 2 * J.ux * J.uy * J.uxy + J.uy * J.uy * J.uyy;
    double div = (J.uxx + J.uyy + Q / v2) / v;
    Vec2 p = G.position_of_node(G.node_of(int(k)));
    out.strong += h * h * ek * std::exp(-u.value(int(k))) * (div - 1 / v - W.at(p));
  }
  // centred difference with a probe small enough to stay strictly spacelike
  for (double t = 1e-5; t >= 1e-9; t *= 0.1) {
    GridField plus = u, minus = u;
    for (std::size_t k = 0; k < G.unknowns(); ++k) {
      plus.values()[k] += t * e.values()[k];
      minus.values()[k] -= t * e.values()[k];
    }
    FunctionalValue fp = functional_F(plus, W, q), fm = functional_F(minus, W, q);
    if (fp.max_gradient >= 1.0 || fm.max_gradient >= 1.0) continue;
    out.t = t;
    out.finite_difference = (fp.value - fm.value) / (2 * t);
    out.agree = std::abs(out.weak - out.finite_difference) <= 1e-6 * (1 + out.eta_norm);
    return out;
  }
  throw NumericalFailure("first variation", "no probe t >= 1e-9 keeps u + t eta strictly spacelike");
}

bool project_admissible(GridField& w, const GridField* anchor, int sweeps, double slack) {
  const Grid& G = w.grid();
  const double h = G.h();
  CellQuadrature q(G);
  // slope clipping along grid edges (discrete inf/sup-convolution with the cone), four orderings
  const double arm[8] = {h, h, h, h, std::sqrt(2.0) * h, std::sqrt(2.0) * h, std::sqrt(2.0) * h, std::sqrt(2.0) * h};
  int used = 0;
  for (; used < std::min(sweeps / 2, 16); ++used) {
    bool changed = false;
    const int n = int(G.unknowns());
    for (int kk = 0; kk < n; ++kk) {
      int k = used % 2 ? n - 1 - kk : kk;
      double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
      std::size_t nd = G.node_of(k);
      int i = G.node_i(nd), j = G.node_j(nd);
      for (int d = 0; d < 8; ++d) {
        int ii = i + kDirX[d], jj = j + kDirY[d];
        if (!G.in_box(ii, jj)) continue;
        double wn = w.node_value(G.node(ii, jj));
        if (std::isnan(wn)) continue;
        lo = std::max(lo, wn - arm[d]);
        hi = std::min(hi, wn + arm[d]);
      }
      double& x = w.values()[std::size_t(k)];
      if (lo > hi) continue;
      if (x > hi) x = hi, changed = true;
      else if (x < lo) x = lo, changed = true;
    }
    if (!changed) break;
  }
  for (int s = used; s < sweeps; ++s) {
    double worst = 0.0;
    const auto& cells = q.cells();
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      // alternate the sweep direction
      const auto& c = cells[s % 2 ? cells.size() - 1 - ci : ci];
      CellJet J = cell_jet(w, c, h);
      double g = std::hypot(J.gx, J.gy);
      worst = std::max(worst, g);
      if (g <= 1.0) continue;
      // least-norm change of the free corners taking the cell gradient to the unit circle
      static constexpr double jx[4] = {-1, 1, -1, 1}, jy[4] = {-1, -1, 1, 1};
      int free[4];
      int m = 0;
      for (int a = 0; a < 4; ++a)
        if (G.unknown(c.nodes[a]) >= 0) free[m++] = a;
      if (m == 0) continue;
      double target = 1.0 - 1e-6;
      // over-relaxed projection onto the cell constraint
      double shrink = std::max(0.0, 1 - 1.6 * (1 - target / g));
      double dgx = J.gx * (shrink - 1), dgy = J.gy * (shrink - 1);
      // rows of the gradient map restricted to free corners (scaled by 2h)
      double a11 = 0, a12 = 0, a22 = 0;
      for (int r = 0; r < m; ++r) {
        a11 += jx[free[r]] * jx[free[r]];
        a12 += jx[free[r]] * jy[free[r]];
        a22 += jy[free[r]] * jy[free[r]];
      }
      double reg = 1e-12;
      double det = (a11 + reg) * (a22 + reg) - a12 * a12;
      double bx = 2 * h * dgx, by = 2 * h * dgy;
      double lx = ((a22 + reg) * bx - a12 * by) / det, ly = ((a11 + reg) * by - a12 * bx) / det;
      for (int r = 0; r < m; ++r) {
        int k = G.unknown(c.nodes[free[r]]);
        w.values()[k] += jx[free[r]] * lx + jy[free[r]] * ly;
      }
    }
    if (worst <= 1.0 + slack) return true;
  }
  double worst = 0.0;
  for (const auto& c : q.cells()) {
    CellJet J = cell_jet(w, c, h);
    worst = std::max(worst, std::hypot(J.gx, J.gy));
  }
  if (worst <= 1.0 + slack) return true;
  if (!anchor) return false;
  // pull back toward the strictly spacelike anchor: largest t with |D(a + t (w - a))| <= 1
  double t = 1.0;
  for (const auto& c : q.cells()) {
    CellJet A = cell_jet(*anchor, c, h), B = cell_jet(w, c, h);
    double dx = B.gx - A.gx, dy = B.gy - A.gy;
    double qa = dx * dx + dy * dy, qb = 2 * (A.gx * dx + A.gy * dy), qc = A.gx * A.gx + A.gy * A.gy - 1.0;
    if (qc >= 0) return false;
    if (qa * t * t + qb * t + qc <= 0) continue;
    double disc = std::sqrt(qb * qb - 4 * qa * qc);
    t = std::min(t, qb >= 0 ? -2 * qc / (qb + disc) : (-qb + disc) / (2 * qa));
  }
  t *= 1 - 1e-9;
  for (std::size_t k = 0; k < G.unknowns(); ++k)
    w.values()[k] = anchor->values()[k] + t * (w.values()[k] - anchor->values()[k]);
  return true;
}

std::string MaximalityReport::to_json() const {
  nlohmann::ordered_json j;
  j["F_value"] = F_value;
  j["worst_margin"] = worst_margin;
  j["tolerance"] = tolerance;
  j["trials"] = trials;
  j["skipped"] = skipped;
  j["seed"] = seed;
  j["spike_margin"] = spike_margin;
  j["passed"] = passed;
  return j.dump(2);
}

MaximalityReport maximality_test(const GridField& u, int n_trials, std::uint64_t seed, double c, int jobs) {
  const Grid& G = u.grid();
  const ConvexDomain& dom = G.domain();
  const double h = G.h();
  const CellQuadrature q(G);
  const Weight W{c, {}};
  MaximalityReport rep;
  rep.seed = seed;
  rep.trials = n_trials;
  rep.tolerance = 10 * h * h;
  rep.F_value = functional_F(u, W, q).value;

  double inradius = 0.0;
  std::size_t deepest = 0;
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    double d = dom.distance_to_boundary(G.position_of_node(G.node_of(int(k))));
    if (d > inradius) inradius = d, deepest = k;
  }
  if (!(inradius / 4 > 3 * h)) throw std::invalid_argument("domain too small for the bump radii at this spacing");
  std::vector<Vec2> box = dom.boundary_samples();
  Vec2 lo = box[0], hi = box[0];
  for (auto p : box) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }

  std::vector<double> margin(std::size_t(std::max(n_trials, 0)), 0.0);
  std::vector<char> skipped(margin.size(), 0);
  auto trial = [&](int t) {
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * std::uint64_t(t + 1));
    std::uniform_real_distribution<double> U01(0.0, 1.0);
    double rho = 3 * h + U01(rng) * (inradius / 4 - 3 * h);
    double amp = -0.2 + 0.4 * U01(rng);
    Vec2 x0;
    do {
      x0 = {lo.x + U01(rng) * (hi.x - lo.x), lo.y + U01(rng) * (hi.y - lo.y)};
    } while (!dom.contains(x0) || dom.distance_to_boundary(x0) < rho + 2 * h);
    GridField w = u;
    for (std::size_t k = 0; k < G.unknowns(); ++k) {
      double r = norm(G.position_of_node(G.node_of(int(k))) - x0) / rho;
      if (r < 1) w.values()[k] += amp * (1 - r * r) * (1 - r * r);
    }
    if (!project_admissible(w, &u)) {
      skipped[std::size_t(t)] = 1;
      return;
    }
    margin[std::size_t(t)] = functional_F(w, W, q).value - rep.F_value;
  };
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    for (int t = 0; t < n_trials; ++t) trial(t);
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back([&, j] {
        for (int t = j; t < n_trials; t += jobs) trial(t);
      });
    for (auto& th : pool) th.join();
  }
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < margin.size(); ++t) {
    if (skipped[t]) ++rep.skipped;
    else rep.worst_margin = std::max(rep.worst_margin, margin[t]);
  }
  if (rep.skipped == n_trials) rep.worst_margin = 0.0;

  // Lipschitz-1 tent above the deepest node
  Vec2 x0 = G.position_of_node(G.node_of(int(deepest)));
  double top = u.value(int(deepest)) + std::min(0.5, inradius / 4);
  GridField spike = u;
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    double tent = top - norm(G.position_of_node(G.node_of(int(k))) - x0);
    spike.values()[k] = std::max(spike.values()[k], tent);
  }
  project_admissible(spike, &u);
  rep.spike_margin = functional_F(spike, W, q).value - rep.F_value;
  rep.passed = rep.worst_margin <= rep.tolerance && rep.spike_margin < 0;
  return rep;
}

bool reversed_cauchy_schwarz_check(Vec2 p, Vec2 q, double eps) {
  if (norm(p) > 1 + 1e-15 || norm(q) > 1 + 1e-15) throw std::invalid_argument("vectors must have norm <= 1");
  double e2 = eps * eps;
  double lhs = std::sqrt(std::max(0.0, 1 - e2 * dot(p, p))) * std::sqrt(std::max(0.0, 1 - e2 * dot(q, q)));
  return lhs <= 1 - e2 * dot(p, q) + 1e-14;
}

CauchySchwarzAudit reversed_cauchy_schwarz_audit(std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U01(0.0, 1.0);
  auto in_disk = [&] {
    double r = std::sqrt(U01(rng)), a = 2 * kPi * U01(rng);
    return unit_at(a) * r;
  };
  CauchySchwarzAudit out;
  out.pairs = pairs;
  out.worst_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pairs; ++i) {
    Vec2 p = in_disk(), q = in_disk();
    double eps = U01(rng);
    double e2 = eps * eps;
    double lhs = std::sqrt(1 - e2 * dot(p, p)) * std::sqrt(1 - e2 * dot(q, q));
    out.worst_gap = std::max(out.worst_gap, lhs - (1 - e2 * dot(p, q)));
    if (!reversed_cauchy_schwarz_check(p, q, eps)) ++out.violations;
  }
  return out;
}

}  // namespace soliton
