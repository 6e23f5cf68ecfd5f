#include "soliton/grid.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace soliton {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const double kSqrt2 = std::sqrt(2.0);

// first and second derivative weights for unequal arms a (plus side) and b (minus side)
void pair_weights(double a, double b, double& wp1, double& wm1, double& w01, double& wp2,
                  double& wm2, double& w02) {
  wp1 = b / (a * (a + b));
  wm1 = -a / (b * (a + b));
  w01 = (a - b) / (a * b);
  wp2 = 2.0 / (a * (a + b));
  wm2 = 2.0 / (b * (a + b));
  w02 = -2.0 / (a * b);
}

}  // namespace

Stencil make_stencil(const std::array<double, 8>& arm) {
  Stencil s;
  double p1, m1, c1, p2, m2, c2;
  // x: E (0) / W (1)
  pair_weights(arm[0], arm[1], p1, m1, c1, p2, m2, c2);
  s.dx[0] = c1, s.dx[1] = p1, s.dx[2] = m1;
  s.dxx[0] = c2, s.dxx[1] = p2, s.dxx[2] = m2;
  // y: N (2) / S (3)
  pair_weights(arm[2], arm[3], p1, m1, c1, p2, m2, c2);
  s.dy[0] = c1, s.dy[3] = p1, s.dy[4] = m1;
  s.dyy[0] = c2, s.dyy[3] = p2, s.dyy[4] = m2;
  // u_xy = (D_{(1,1)} - D_{(1,-1)}) / 2 with directional second differences
  pair_weights(arm[4], arm[5], p1, m1, c1, p2, m2, c2);
  s.dxy[0] += 0.5 * c2, s.dxy[5] += 0.5 * p2, s.dxy[6] += 0.5 * m2;
  pair_weights(arm[6], arm[7], p1, m1, c1, p2, m2, c2);
  s.dxy[0] -= 0.5 * c2, s.dxy[7] -= 0.5 * p2, s.dxy[8] -= 0.5 * m2;
  return s;
}

Grid::Grid(std::shared_ptr<const ConvexDomain> domain, double h) : domain_(std::move(domain)), h_(h) {
  if (!(h > 0)) throw std::invalid_argument("grid spacing must be positive");
  double ext_x = 0.0, ext_y = 0.0;
  for (auto p : domain_->boundary_samples()) {
    Vec2 q = p - domain_->center();
    ext_x = std::max(ext_x, std::abs(q.x));
    ext_y = std::max(ext_y, std::abs(q.y));
  }
  mi_ = static_cast<int>(std::ceil(ext_x * 1.01 / h)) + 2;
  mj_ = static_cast<int>(std::ceil(ext_y * 1.01 / h)) + 2;
  const std::size_t total = static_cast<std::size_t>(nx()) * static_cast<std::size_t>(ny());
  kind_.assign(total, NodeKind::exterior);
  index_.assign(total, -1);
  const double margin = 1e-8 * h;
  for (int j = -mj_; j <= mj_; ++j) {
    for (int i = -mi_; i <= mi_; ++i) {
      if (domain_->contains(position(i, j), margin)) {
        std::size_t n = node(i, j);
        kind_[n] = NodeKind::interior;
        index_[n] = static_cast<int>(nodes_.size());
        nodes_.push_back(n);
      }
    }
  }
  if (nodes_.empty()) throw std::invalid_argument("grid has no interior nodes");

  std::array<double, 8> full{h, h, h, h, kSqrt2 * h, kSqrt2 * h, kSqrt2 * h, kSqrt2 * h};
  regular_ = make_stencil(full);
  slot_.assign(nodes_.size(), -1);
  for (std::size_t u = 0; u < nodes_.size(); ++u) {
    int i = node_i(nodes_[u]), j = node_j(nodes_[u]);
    std::array<double, 8> cut;
    cut.fill(kNaN);
    bool any = false;
    for (int d = 0; d < 8; ++d) {
      int ii = i + kDirX[d], jj = j + kDirY[d];
      if (in_box(ii, jj) && kind_[node(ii, jj)] == NodeKind::interior) continue;
      if (in_box(ii, jj)) kind_[node(ii, jj)] = NodeKind::ring;
      Vec2 dir = Vec2{double(kDirX[d]), double(kDirY[d])} / (d < 4 ? 1.0 : kSqrt2);
      double s = domain_->crossing(position(i, j), dir, full[d]);
      if (!std::isfinite(s)) s = full[d];
      cut[d] = s;
      any = true;
    }
    if (any) {
      slot_[u] = static_cast<int>(cuts_.size());
      cuts_.push_back(cut);
      std::array<double, 8> a = full;
      for (int d = 0; d < 8; ++d)
        if (!std::isnan(cut[d])) a[d] = cut[d];
      cut_stencils_.push_back(make_stencil(a));
    }
  }
}

int Grid::neighbour(int u, int d) const {
  int s = slot_[u];
  if (s >= 0 && !std::isnan(cuts_[s][d])) return -1;
  std::size_t n = nodes_[u];
  return index_[node(node_i(n) + kDirX[d], node_j(n) + kDirY[d])];
}

std::array<double, 8> Grid::arms(int u) const {
  std::array<double, 8> a{h_, h_, h_, h_, kSqrt2 * h_, kSqrt2 * h_, kSqrt2 * h_, kSqrt2 * h_};
  int s = slot_[u];
  if (s >= 0)
    for (int d = 0; d < 8; ++d)
      if (!std::isnan(cuts_[s][d])) a[d] = cuts_[s][d];
  return a;
}

Vec2 Grid::cut_point(int u, int d) const {
  Vec2 dir = Vec2{double(kDirX[d]), double(kDirY[d])} / (d < 4 ? 1.0 : kSqrt2);
  return position_of_node(nodes_[u]) + dir * arms(u)[d];
}

const Stencil& Grid::stencil(int u) const {
  int s = slot_[u];
  return s >= 0 ? cut_stencils_[s] : regular_;
}

// ---------------------------------------------------------------- fields

GridField::GridField(std::shared_ptr<const Grid> grid, double boundary_value)
    : grid_(std::move(grid)), boundary_value_(boundary_value) {
  values_.assign(grid_->unknowns(), boundary_value);
}

GridField GridField::sample(std::shared_ptr<const Grid> grid, const std::function<double(Vec2)>& f) {
  GridField g(grid, 0.0);
  const Grid& G = *grid;
  for (std::size_t u = 0; u < G.unknowns(); ++u) g.values_[u] = f(G.position_of_node(G.node_of(int(u))));
  g.cut_values_.assign(G.cut_slots(), {});
  for (std::size_t u = 0; u < G.unknowns(); ++u) {
    int s = G.slot(int(u));
    if (s < 0) continue;
    for (int d = 0; d < 8; ++d) {
      g.cut_values_[s][d] = G.neighbour(int(u), d) < 0 ? f(G.cut_point(int(u), d)) : kNaN;
    }
  }
  g.ring_values_.assign(G.node_count(), kNaN);
  for (std::size_t n = 0; n < G.node_count(); ++n)
    if (G.kind(n) == NodeKind::ring) g.ring_values_[n] = f(G.position_of_node(n));
  return g;
}

double GridField::cut_value(int u, int d) const {
  if (cut_values_.empty()) return boundary_value_;
  return cut_values_[grid_->slot(u)][d];
}

double GridField::node_value(std::size_t n) const {
  int u = grid_->unknown(n);
  if (u >= 0) return values_[u];
  if (grid_->kind(n) != NodeKind::ring) return kNaN;
  return ring_values_.empty() ? boundary_value_ : ring_values_[n];
}

std::array<double, 9> GridField::gather(int u) const {
  std::array<double, 9> v;
  v[0] = values_[u];
  const Grid& G = *grid_;
  if (!G.near_boundary(u)) {
    std::size_t n = G.node_of(u);
    int i = G.node_i(n), j = G.node_j(n);
    for (int d = 0; d < 8; ++d) v[1 + d] = values_[G.unknown(G.node(i + kDirX[d], j + kDirY[d]))];
    return v;
  }
  for (int d = 0; d < 8; ++d) {
    int nb = G.neighbour(u, d);
    v[1 + d] = nb >= 0 ? values_[nb] : cut_value(u, d);
  }
  return v;
}

LocalJet GridField::jet(int u) const {
  auto v = gather(u);
  const Stencil& s = grid_->stencil(u);
  LocalJet J;
  for (int k = 0; k < 9; ++k) {
    J.ux += s.dx[k] * v[k];
    J.uy += s.dy[k] * v[k];
    J.uxx += s.dxx[k] * v[k];
    J.uyy += s.dyy[k] * v[k];
    J.uxy += s.dxy[k] * v[k];
  }
  return J;
}

double GridField::interpolate(Vec2 x) const {
  const Grid& G = *grid_;
  Vec2 q = (x - G.domain().center()) / G.h();
  int i0 = static_cast<int>(std::floor(q.x)), j0 = static_cast<int>(std::floor(q.y));
  double tx = q.x - i0, ty = q.y - j0;
  if (!G.in_box(i0, j0) || !G.in_box(i0 + 1, j0 + 1)) return kNaN;
  double v00 = node_value(G.node(i0, j0)), v10 = node_value(G.node(i0 + 1, j0));
  double v01 = node_value(G.node(i0, j0 + 1)), v11 = node_value(G.node(i0 + 1, j0 + 1));
  return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11;
}

GridField& GridField::operator+=(double b) {
  for (double& v : values_) v += b;
  boundary_value_ += b;
  for (auto& c : cut_values_)
    for (double& v : c) v += b;
  for (double& v : ring_values_) v += b;
  return *this;
}

}  // namespace soliton
