#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "soliton/grid.hpp"

namespace soliton::detail {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Vec = Eigen::VectorXd;

// Second-order coefficients a11, a12, a22 and first-order b1, b2 of a linear
// operator a11 u_xx + 2 a12 u_xy + a22 u_yy + b1 u_x + b2 u_y.
struct Coeff {
  double a11 = 1, a12 = 0, a22 = 1, b1 = 0, b2 = 0;
};

// Row u holds all 9 stencil entries (zeros included) so the pattern is fixed for a grid.
// Arms ending at cut points contribute weight * cut value to cut_rhs.
void assemble(const Grid& g, const std::vector<Coeff>& coeff, const GridField* boundary, SpMat& A,
              Vec* cut_rhs);

class DirectSolver {
 public:
  DirectSolver();
  ~DirectSolver();
  void factorize(const SpMat& A);
  void solve(const Vec& b, Vec& x) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Geometric multigrid V-cycle on nested grids (spacing doubles per level), used as a
// right preconditioner for BiCGSTAB. Coarse operators are Galerkin products R A P.
class MultigridSolver {
 public:
  explicit MultigridSolver(std::vector<std::shared_ptr<const Grid>> grids);
  ~MultigridSolver();
  void setup(const SpMat& A0);
  // returns the iteration count; throws on breakdown
  int solve(const Vec& b, Vec& x, double rel_tol, int max_iter = 400);

 private:
  struct Level;
  void vcycle(std::size_t l, const Vec& b, Vec& x);
  std::vector<std::unique_ptr<Level>> levels_;
  std::unique_ptr<DirectSolver> coarse_;
};

}  // namespace soliton::detail
