#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "soliton/grid.hpp"

namespace soliton {

// W in F_W(w) = int e^{-w} (sqrt(1 - |Dw|^2) + W); a constant c gives F_c.
struct Weight {
  double constant = 0.0;
  std::function<double(Vec2)> field;  // overrides constant when set
  double at(Vec2 x) const { return field ? field(x) : constant; }
};

// Midpoint rule on grid cells whose four corners carry values (unknowns or ring
// nodes); cells cut by the boundary are weighted by their inside fraction.
class CellQuadrature {
 public:
  explicit CellQuadrature(const Grid& grid, int subsamples = 8);

  struct Cell {
    std::array<std::size_t, 4> nodes;  // (i,j), (i+1,j), (i,j+1), (i+1,j+1)
    Vec2 mid;
    double weight;  // area inside the domain
  };
  const std::vector<Cell>& cells() const { return cells_; }
  double area() const;

 private:
  std::vector<Cell> cells_;
};

struct FunctionalValue {
  double value = 0.0;
  std::size_t clamped = 0;  // cells with |Dw| > 1 where the square root was clamped at 0
  double max_gradient = 0.0;
};

FunctionalValue functional_F(const GridField& w, const Weight& W, const CellQuadrature& q);
FunctionalValue functional_F(const GridField& w, const Weight& W = {});

struct FirstVariation {
  double weak = 0.0;    // -int eta e^{-u}(v + W) + e^{-u} Du.Deta / v, exact derivative of the discrete F
  double strong = 0.0;  // int eta e^{-u}(div(Du/v) - 1/v - W) with the solver's stencils
  double finite_difference = 0.0;
  double t = 0.0;       // probe used for the finite difference
  double eta_norm = 0.0;
  bool agree = false;   // |weak - fd| <= 1e-6 (1 + |eta|)
};

// eta is sampled at the unknowns and must vanish near the boundary
FirstVariation first_variation(const GridField& u, const std::function<double(Vec2)>& eta,
                               const Weight& W = {});

// Projects onto cellwise |Dw| <= 1 keeping ring values and boundary data fixed:
// edge slope clipping, then cellwise projections. If 'sweeps' passes are not enough and a
// strictly spacelike anchor on the same grid is given, w is pulled toward it until admissible.
// Returns false when admissibility is not reached.
bool project_admissible(GridField& w, const GridField* anchor = nullptr, int sweeps = 100,
                        double slack = 1e-12);

struct MaximalityReport {
  double F_value = 0.0;
  double worst_margin = 0.0;  // max over competitors of F(w) - F(u)
  double tolerance = 0.0;     // 10 h^2
  int trials = 0;
  int skipped = 0;
  std::uint64_t seed = 0;
  double spike_margin = 0.0;  // F(spike competitor) - F(u), expected < 0
  bool passed = false;
  std::string to_json() const;
};

MaximalityReport maximality_test(const GridField& u, int n_trials, std::uint64_t seed, double c,
                                 int jobs = 1);

// sqrt(1 - e^2|p|^2) sqrt(1 - e^2|q|^2) <= 1 - e^2 p.q
bool reversed_cauchy_schwarz_check(Vec2 p, Vec2 q, double eps);

struct CauchySchwarzAudit {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double worst_gap = 0.0;  // max lhs - rhs
};
CauchySchwarzAudit reversed_cauchy_schwarz_audit(std::size_t pairs, std::uint64_t seed);

}  // namespace soliton
