#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "soliton/dirichlet.hpp"
#include "soliton/io.hpp"
#include "soliton/numerics.hpp"

namespace soliton {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double operator_value(const LocalJet& J, double c, double sigma, double& v) {
  double v2 = 1.0 - J.grad2();
  if (!(v2 > 0)) return kNaN;
  v = std::sqrt(v2);
  double Q = J.ux * J.ux * J.uxx + 2 * J.ux * J.uy * J.uxy + J.uy * J.uy * J.uyy;
  return J.uxx + J.uyy + Q / v2 - sigma * (1.0 + c * v);
}

std::string where(Vec2 p) {
  return "(" + format_number(p.x) + ", " + format_number(p.y) + ")";
}

}  // namespace

ResidualField residual_field(const GridField& u, double c, double sigma) {
  const Grid& G = u.grid();
  ResidualField out;
  out.values.resize(G.unknowns());
  double sum2 = 0.0;
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    LocalJet J = u.jet(int(k));
    double v;
    double r = operator_value(J, c, sigma, v);
    if (std::isnan(r))
      throw NumericalFailure("residual", "field is not spacelike at " + where(G.position_of_node(G.node_of(int(k)))));
    out.values[k] = r;
    out.sup = std::max(out.sup, std::abs(r));
    sum2 += r * r;
    out.hessian_sup = std::max(out.hessian_sup, std::sqrt(J.uxx * J.uxx + 2 * J.uxy * J.uxy + J.uyy * J.uyy));
  }
  out.l2 = std::sqrt(sum2) * G.h();
  return out;
}

GradientCertificate gradient_certificate(const GridField& u) {
  const Grid& G = u.grid();
  GradientCertificate cert;
  cert.bound = std::tanh(G.domain().diameter());
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    double g2 = u.jet(int(k)).grad2();
    if (std::sqrt(g2) > cert.max_gradient) {
      cert.max_gradient = std::sqrt(g2);
      cert.location = G.position_of_node(G.node_of(int(k)));
    }
    if (G.near_boundary(int(k))) cert.max_ring = std::max(cert.max_ring, g2);
    else cert.max_inner = std::max(cert.max_inner, g2);
  }
  const double slack = 5 * G.h();
  cert.bound_ok = cert.max_gradient <= cert.bound + slack;
  cert.maximum_principle_ok = cert.max_inner <= cert.max_ring + slack;
  return cert;
}

ConvexityCertificate convexity_certificate(const GridField& u, std::optional<double> tol) {
  const Grid& G = u.grid();
  ConvexityCertificate cert;
  cert.tolerance = tol.value_or(10 * G.h());
  cert.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    LocalJet J = u.jet(int(k));
    double m = 0.5 * (J.uxx + J.uyy);
    double d = std::hypot(0.5 * (J.uxx - J.uyy), J.uxy);
    double lo = m - d;
    if (lo < cert.min_eigenvalue) {
      cert.min_eigenvalue = lo;
      cert.location = G.position_of_node(G.node_of(int(k)));
      // eigenvector of [[uxx, uxy], [uxy, uyy]] for lo
      Vec2 e = std::abs(J.uxy) > 1e-300 ? Vec2{J.uxy, lo - J.uxx} : (J.uxx <= J.uyy ? Vec2{1, 0} : Vec2{0, 1});
      cert.eigenvector = e / norm(e);
    }
  }
  cert.passed = cert.min_eigenvalue >= -cert.tolerance;
  return cert;
}

// ------------------------------------------------------------ level sets

namespace {

struct Crossing {
  Vec2 p;
  LocalJet J;
};

// Hermite cubic on an edge from a (s = 0) to b (s = 1); root of value - level
bool edge_crossing(double fa, double fb, double da, double db, double& s) {
  if ((fa < 0) == (fb < 0)) return false;
  auto val = [&](double t) {
    double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * fa + h10 * da + h01 * fb + h11 * db;
  };
  s = bisect(val, 0.0, 1.0, 1e-14);
  return true;
}

LocalJet blend(const LocalJet& a, const LocalJet& b, double s) {
  return {a.ux + s * (b.ux - a.ux), a.uy + s * (b.uy - a.uy), a.uxx + s * (b.uxx - a.uxx),
          a.uyy + s * (b.uyy - a.uyy), a.uxy + s * (b.uxy - a.uxy)};
}

// circle through three points; signed so a counter-clockwise convex loop is positive
double circle_curvature(Vec2 a, Vec2 b, Vec2 c) {
  double ab = norm(b - a), bc = norm(c - b), ca = norm(a - c);
  return 2 * cross(b - a, c - a) / (ab * bc * ca);
}

}  // namespace

LevelSetReport level_set_identity(const GridField& u, double level, double c, double min_gradient) {
  const Grid& G = u.grid();
  const double h = G.h();
  // crossings on grid edges between unknowns, keyed by (node, direction 0 = +x, 1 = +y)
  std::map<std::pair<std::size_t, int>, Crossing> cross_at;
  auto edge = [&](int i, int j, int dir) -> const Crossing* {
    std::size_t n = G.node(i, j);
    auto key = std::make_pair(n, dir);
    auto it = cross_at.find(key);
    if (it != cross_at.end()) return &it->second;
    int a = G.unknown_at(i, j), b = dir == 0 ? G.unknown_at(i + 1, j) : G.unknown_at(i, j + 1);
    if (a < 0 || b < 0) return nullptr;
    LocalJet Ja = u.jet(a), Jb = u.jet(b);
    double s;
    double da = (dir == 0 ? Ja.ux : Ja.uy) * h, db = (dir == 0 ? Jb.ux : Jb.uy) * h;
    if (!edge_crossing(u.value(a) - level, u.value(b) - level, da, db, s)) return nullptr;
    Vec2 p = G.position(i, j) + (dir == 0 ? Vec2{s * h, 0} : Vec2{0, s * h});
    return &(cross_at[key] = Crossing{p, blend(Ja, Jb, s)});
  };

  // marching squares: link crossings that share a cell
  std::map<const Crossing*, std::vector<const Crossing*>> links;
  for (int j = -G.mj(); j < G.mj(); ++j) {
    for (int i = -G.mi(); i < G.mi(); ++i) {
      if (G.unknown_at(i, j) < 0 || G.unknown_at(i + 1, j) < 0 || G.unknown_at(i, j + 1) < 0 ||
          G.unknown_at(i + 1, j + 1) < 0)
        continue;
      const Crossing* e[4] = {edge(i, j, 0), edge(i + 1, j, 1), edge(i, j + 1, 0), edge(i, j, 1)};
      std::vector<const Crossing*> hit;
      for (auto* x : e)
        if (x) hit.push_back(x);
      if (hit.size() == 2) {
        links[hit[0]].push_back(hit[1]);
        links[hit[1]].push_back(hit[0]);
      } else if (hit.size() == 4) {
        // saddle cell: pair by the centre value
        double centre = 0.25 * (u.value(G.unknown_at(i, j)) + u.value(G.unknown_at(i + 1, j)) +
                                u.value(G.unknown_at(i, j + 1)) + u.value(G.unknown_at(i + 1, j + 1)));
        bool low = u.value(G.unknown_at(i, j)) < level;
        bool pair01 = (centre < level) != low;
        const Crossing* a = e[0];
        const Crossing* b = pair01 ? e[1] : e[3];
        const Crossing* c2 = pair01 ? e[2] : e[1];
        const Crossing* d = pair01 ? e[3] : e[2];
        links[a].push_back(b), links[b].push_back(a);
        links[c2].push_back(d), links[d].push_back(c2);
      }
    }
  }

  // walk the chains, open ones from their ends first
  LevelSetReport rep;
  std::map<const Crossing*, bool> seen;
  std::vector<std::vector<const Crossing*>> chains;
  auto walk = [&](const Crossing* first) {
    std::vector<const Crossing*> chain;
    const Crossing* cur = first;
    while (cur && !seen[cur]) {
      seen[cur] = true;
      chain.push_back(cur);
      const Crossing* next = nullptr;
      for (auto* q : links[cur])
        if (!seen[q]) next = q;
      cur = next;
    }
    chains.push_back(std::move(chain));
  };
  for (auto& [x, nb] : links)
    if (nb.size() == 1 && !seen[x]) walk(x);
  for (auto& [x, nb] : links)
    if (!seen[x]) walk(x);
  for (const auto& chain : chains) {
    const bool closed = links[chain.front()].size() == 2 && links[chain.back()].size() == 2 && chain.size() > 4;
    const std::size_t m = chain.size();
    // arc length along the chain
    std::vector<double> arc(m, 0.0);
    for (std::size_t q = 1; q < m; ++q) arc[q] = arc[q - 1] + norm(chain[q]->p - chain[q - 1]->p);
    const double total = closed ? arc[m - 1] + norm(chain[0]->p - chain[m - 1]->p) : arc[m - 1];
    const double span = 4 * h;
    if (total < 4 * span) continue;
    for (std::size_t q = 0; q < m; ++q) {
      // neighbours at arc distance >= span on either side
      auto along = [&](int dir) -> const Crossing* {
        double acc = 0.0;
        std::size_t k = q;
        for (std::size_t steps = 0; steps < m; ++steps) {
          std::size_t nxt;
          if (dir > 0) {
            if (k + 1 == m && !closed) return nullptr;
            nxt = (k + 1) % m;
          } else {
            if (k == 0 && !closed) return nullptr;
            nxt = (k + m - 1) % m;
          }
          acc += norm(chain[nxt]->p - chain[k]->p);
          k = nxt;
          if (acc >= span) return chain[k];
        }
        return nullptr;
      };
      const Crossing* a = along(-1);
      const Crossing* b = along(+1);
      if (!a || !b) continue;
      const Crossing& x = *chain[q];
      const LocalJet& J = x.J;
      double g = std::sqrt(J.grad2());
      if (g < min_gradient) {
        ++rep.skipped_critical;
        continue;
      }
      double kappa = std::abs(circle_curvature(a->p, x.p, b->p));
      // sign: convex sublevel sets have curvature vector pointing against Du
      Vec2 mid = (a->p + b->p) * 0.5 - x.p;
      if (dot(mid, Vec2{J.ux, J.uy}) > 0) kappa = -kappa;
      double ugg = (J.uxx * J.ux * J.ux + 2 * J.uxy * J.ux * J.uy + J.uyy * J.uy * J.uy) / (g * g);
      double v2 = 1 - g * g;
      if (!(v2 > 0)) continue;
      double v = std::sqrt(v2);
      double r = kappa * g + ugg / v2 - (1 + c * v);
      double ugg_formula = v2 * (1 + c * v - kappa * g);
      rep.points.push_back(x.p);
      rep.residuals.push_back(r);
      rep.sup_residual = std::max(rep.sup_residual, std::abs(r));
      rep.sup_ugg_mismatch = std::max(rep.sup_ugg_mismatch, std::abs(ugg_formula - ugg));
    }
  }
  rep.samples = rep.points.size();
  return rep;
}

// ------------------------------------------------------------ induced Laplacian

LaplacianReport induced_laplacian_check(const GridField& u, double c) {
  const Grid& G = u.grid();
  const double h = G.h();
  LaplacianReport rep;
  auto val = [&](int i, int j) { return u.value(G.unknown_at(i, j)); };
  auto regular = [&](int i, int j) {
    int k = G.unknown_at(i, j);
    return k >= 0 && !G.near_boundary(k);
  };
  double sum2 = 0.0;
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    std::size_t nd = G.node_of(int(k));
    int i = G.node_i(nd), j = G.node_j(nd);
    if (!regular(i, j) || !regular(i + 1, j) || !regular(i - 1, j) || !regular(i, j + 1) || !regular(i, j - 1))
      continue;
    // Du / v on the four faces; tangential derivatives averaged from the two centred differences
    auto face_x = [&](int a) {  // between (a, j) and (a + 1, j)
      double ux = (val(a + 1, j) - val(a, j)) / h;
      double uy = 0.25 * (val(a, j + 1) - val(a, j - 1) + val(a + 1, j + 1) - val(a + 1, j - 1)) / h;
      return ux / std::sqrt(1 - ux * ux - uy * uy);
    };
    auto face_y = [&](int b) {
      double uy = (val(i, b + 1) - val(i, b)) / h;
      double ux = 0.25 * (val(i + 1, b) - val(i - 1, b) + val(i + 1, b + 1) - val(i - 1, b + 1)) / h;
      return uy / std::sqrt(1 - ux * ux - uy * uy);
    };
    double div = (face_x(i) - face_x(i - 1) + face_y(j) - face_y(j - 1)) / h;
    LocalJet J = u.jet(int(k));
    double v2 = 1 - J.grad2();
    if (!(v2 > 0))
      throw NumericalFailure("induced laplacian", "field is not spacelike at " + where(G.position(i, j)));
    double v = std::sqrt(v2);
    double lap = div / v;
    if (!std::isfinite(lap))
      throw NumericalFailure("induced laplacian", "field is not spacelike near " + where(G.position(i, j)));
    double r = lap - (1 / v2 + c / v);
    rep.operator_values.push_back(lap);
    rep.sup_residual = std::max(rep.sup_residual, std::abs(r));
    sum2 += r * r;
    ++rep.nodes;
  }
  rep.l2_residual = std::sqrt(sum2) * h;
  return rep;
}

// ------------------------------------------------------------ comparison

ComparisonReport comparison_check(const GridField& u, const GridField& ubar, Relation rel, double c,
                                  std::optional<double> sign_tolerance) {
  const Grid& G = u.grid();
  if (&ubar.grid() != &G) throw std::invalid_argument("comparison needs fields on the same grid");
  ComparisonReport rep;
  const double h = G.h();
  const double tol = sign_tolerance.value_or(h);
  const double s = rel == Relation::super ? 1.0 : -1.0;
  std::size_t bad = 0;
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    double v;
    double r = operator_value(ubar.jet(int(k)), c, 1.0, v);
    // super: L ubar - (1 + c v) <= 0
    if (std::isnan(r) || s * r > tol) ++bad;
  }
  rep.hypothesis_violation_fraction = double(bad) / double(G.unknowns());
  rep.conclusive = rep.hypothesis_violation_fraction <= 0.01;
  rep.tolerance = 5 * h;
  rep.boundary_bound = -s * std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    if (!G.near_boundary(int(k))) continue;
    for (int d = 0; d < 8; ++d) {
      if (G.neighbour(int(k), d) >= 0) continue;
      double diff = u.cut_value(int(k), d) - ubar.cut_value(int(k), d);
      rep.boundary_bound = s > 0 ? std::max(rep.boundary_bound, diff) : std::min(rep.boundary_bound, diff);
    }
  }
  rep.interior_extreme = -s * std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    double diff = u.value(int(k)) - ubar.value(int(k));
    rep.interior_extreme = s > 0 ? std::max(rep.interior_extreme, diff) : std::min(rep.interior_extreme, diff);
  }
  rep.holds = s > 0 ? rep.interior_extreme <= rep.boundary_bound + rep.tolerance
                    : rep.interior_extreme >= rep.boundary_bound - rep.tolerance;
  return rep;
}

void write_field_csv(const GridField& u, double c, const std::string& path) {
  const Grid& G = u.grid();
  std::ostringstream os;
  os << "x,y,u,ux,uy,v,H,residual\n";
  for (std::size_t k = 0; k < G.unknowns(); ++k) {
    Vec2 p = G.position_of_node(G.node_of(int(k)));
    LocalJet J = u.jet(int(k));
    double v = kNaN;
    double r = operator_value(J, c, 1.0, v);
    os << format_number(p.x) << ',' << format_number(p.y) << ',' << format_number(u.value(int(k))) << ','
       << format_number(J.ux) << ',' << format_number(J.uy) << ',' << format_number(v) << ','
       << format_number(1 / v + c) << ',' << format_number(r) << '\n';
  }
  write_text_atomic(path, os.str());
}

}  // namespace soliton
