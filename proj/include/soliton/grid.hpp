#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "soliton/geometry.hpp"

namespace soliton {

enum class NodeKind : std::uint8_t { exterior, ring, interior };

// Stencil directions: E, W, N, S, NE, SW, SE, NW (pairs are opposite).
inline constexpr std::array<int, 8> kDirX{1, -1, 0, 0, 1, -1, 1, -1};
inline constexpr std::array<int, 8> kDirY{0, 0, 1, -1, 1, -1, -1, 1};

// Weights of the derivative operators over the 9 points (0 = centre, 1 + d = direction d).
struct Stencil {
  std::array<double, 9> dx{}, dy{}, dxx{}, dyy{}, dxy{};
};

struct LocalJet {
  double ux = 0, uy = 0, uxx = 0, uyy = 0, uxy = 0;
  double grad2() const { return ux * ux + uy * uy; }
};

// Cartesian nodes centre + (i, j) h, |i| <= mi, |j| <= mj, masked to a convex domain.
// Arms that leave the domain are cut at the exact boundary crossing (Shortley-Weller).
class Grid {
 public:
  Grid(std::shared_ptr<const ConvexDomain> domain, double h);

  const ConvexDomain& domain() const { return *domain_; }
  std::shared_ptr<const ConvexDomain> domain_ptr() const { return domain_; }
  double h() const { return h_; }
  int mi() const { return mi_; }
  int mj() const { return mj_; }
  int nx() const { return 2 * mi_ + 1; }
  int ny() const { return 2 * mj_ + 1; }
  std::size_t node_count() const { return kind_.size(); }
  std::size_t unknowns() const { return nodes_.size(); }

  std::size_t node(int i, int j) const { return static_cast<std::size_t>((j + mj_) * nx() + (i + mi_)); }
  int node_i(std::size_t node) const { return static_cast<int>(node % nx()) - mi_; }
  int node_j(std::size_t node) const { return static_cast<int>(node / nx()) - mj_; }
  Vec2 position(int i, int j) const { return domain_->center() + Vec2{i * h_, j * h_}; }
  Vec2 position_of_node(std::size_t n) const { return position(node_i(n), node_j(n)); }
  bool in_box(int i, int j) const { return std::abs(i) <= mi_ && std::abs(j) <= mj_; }

  NodeKind kind(std::size_t node) const { return kind_[node]; }
  int unknown(std::size_t node) const { return index_[node]; }
  std::size_t node_of(int unknown) const { return nodes_[unknown]; }
  int unknown_at(int i, int j) const { return in_box(i, j) ? index_[node(i, j)] : -1; }

  // neighbour unknown in direction d, or -1 when that arm is cut
  int neighbour(int unknown, int d) const;
  // arm lengths (full length when not cut)
  std::array<double, 8> arms(int unknown) const;
  bool near_boundary(int unknown) const { return slot_[unknown] >= 0; }
  Vec2 cut_point(int unknown, int d) const;
  const Stencil& stencil(int unknown) const;
  int slot(int unknown) const { return slot_[unknown]; }
  std::size_t cut_slots() const { return cuts_.size(); }

 private:
  std::shared_ptr<const ConvexDomain> domain_;
  double h_;
  int mi_, mj_;
  std::vector<NodeKind> kind_;
  std::vector<int> index_;
  std::vector<std::size_t> nodes_;
  std::vector<int> slot_;
  std::vector<std::array<double, 8>> cuts_;  // NaN where the arm is not cut
  std::vector<Stencil> cut_stencils_;
  Stencil regular_;
};

Stencil make_stencil(const std::array<double, 8>& arms);

// Scalar field on the unknowns of a grid plus Dirichlet data on the cut points.
class GridField {
 public:
  GridField() = default;
  // constant Dirichlet data
  GridField(std::shared_ptr<const Grid> grid, double boundary_value);
  // values, cut data and ring values sampled from f
  static GridField sample(std::shared_ptr<const Grid> grid, const std::function<double(Vec2)>& f);

  const Grid& grid() const { return *grid_; }
  std::shared_ptr<const Grid> grid_ptr() const { return grid_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double value(int unknown) const { return values_[unknown]; }

  // Dirichlet value at the cut point of arm d of a near-boundary unknown
  double cut_value(int unknown, int d) const;
  bool constant_boundary() const { return cut_values_.empty(); }
  double boundary_value() const { return boundary_value_; }
  // value at any node in the box: unknowns, ring nodes carry the boundary data
  double node_value(std::size_t node) const;

  // the 9 values used by the stencil at an unknown
  std::array<double, 9> gather(int unknown) const;
  LocalJet jet(int unknown) const;
  // bilinear interpolation of node values; NaN outside the box
  double interpolate(Vec2 x) const;

  GridField& operator+=(double b);

 private:
  std::shared_ptr<const Grid> grid_;
  std::vector<double> values_;
  double boundary_value_ = 0.0;
  std::vector<std::array<double, 8>> cut_values_;  // per cut slot when not constant
  std::vector<double> ring_values_;                // per node when not constant
};

}  // namespace soliton
