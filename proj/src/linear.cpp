#include "linear.hpp"

#include <Eigen/UmfPackSupport>
#include <algorithm>
#include <cmath>

#include "soliton/numerics.hpp"

namespace soliton::detail {

void assemble(const Grid& g, const std::vector<Coeff>& coeff, const GridField* boundary, SpMat& A,
              Vec* cut_rhs) {
  const int n = static_cast<int>(g.unknowns());
  A.resize(n, n);
  A.resizeNonZeros(0);
  A.reserve(Eigen::VectorXi::Constant(n, 9));
  if (cut_rhs) cut_rhs->setZero(n);
  std::array<std::pair<int, double>, 9> row;
  for (int u = 0; u < n; ++u) {
    const Stencil& s = g.stencil(u);
    const Coeff& c = coeff[u];
    int cnt = 0;
    double cut_sum = 0.0;
    for (int k = 0; k < 9; ++k) {
      double w = c.a11 * s.dxx[k] + c.a22 * s.dyy[k] + 2.0 * c.a12 * s.dxy[k] + c.b1 * s.dx[k] +
                 c.b2 * s.dy[k];
      int col = k == 0 ? u : g.neighbour(u, k - 1);
      if (col < 0) {
        if (boundary) cut_sum += w * boundary->cut_value(u, k - 1);
        continue;
      }
      row[cnt++] = {col, w};
    }
    std::sort(row.begin(), row.begin() + cnt);
    for (int k = 0; k < cnt; ++k) A.insert(u, row[k].first) = row[k].second;
    if (cut_rhs) (*cut_rhs)[u] = cut_sum;
  }
  A.makeCompressed();
}

struct DirectSolver::Impl {
  Eigen::SparseMatrix<double> matrix;  // the LU keeps a reference to it
  Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu;
};

DirectSolver::DirectSolver() : impl_(std::make_unique<Impl>()) {}
DirectSolver::~DirectSolver() = default;

void DirectSolver::factorize(const SpMat& A) {
  impl_->matrix = A;
  impl_->lu.compute(impl_->matrix);
  if (impl_->lu.info() != Eigen::Success) throw NumericalFailure("linear solve", "sparse LU failed");
}

void DirectSolver::solve(const Vec& b, Vec& x) const { x = impl_->lu.solve(b); }

struct MultigridSolver::Level {
  std::shared_ptr<const Grid> grid;
  SpMat A;
  std::vector<int> diag;
  SpMat P;  // bilinear prolongation from the next coarser level
  SpMat R;  // full weighting, P^T / 4
  Vec b, x, r;
};

MultigridSolver::MultigridSolver(std::vector<std::shared_ptr<const Grid>> grids) {
  for (std::size_t l = 0; l < grids.size(); ++l) {
    auto L = std::make_unique<Level>();
    L->grid = grids[l];
    levels_.push_back(std::move(L));
  }
  for (std::size_t l = 0; l + 1 < grids.size(); ++l) {
    const Grid& f = *grids[l];
    const Grid& c = *grids[l + 1];
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(f.unknowns() * 4);
    for (std::size_t u = 0; u < f.unknowns(); ++u) {
      std::size_t nd = f.node_of(int(u));
      int i = f.node_i(nd), j = f.node_j(nd);
      int I0 = static_cast<int>(std::floor(i / 2.0)), J0 = static_cast<int>(std::floor(j / 2.0));
      int na = (i - 2 * I0) ? 2 : 1, nb = (j - 2 * J0) ? 2 : 1;
      double w = 1.0 / (na * nb);
      for (int b = 0; b < nb; ++b)
        for (int a = 0; a < na; ++a) {
          int U = c.unknown_at(I0 + a, J0 + b);
          if (U >= 0) trip.emplace_back(int(u), U, w);
        }
    }
    Level& L = *levels_[l];
    L.P.resize(int(f.unknowns()), int(c.unknowns()));
    L.P.setFromTriplets(trip.begin(), trip.end());
    L.R = SpMat(L.P.transpose()) * 0.25;
  }
  coarse_ = std::make_unique<DirectSolver>();
}

MultigridSolver::~MultigridSolver() = default;

namespace {
void find_diagonal(const SpMat& A, std::vector<int>& diag) {
  diag.assign(A.rows(), -1);
  for (int i = 0; i < A.rows(); ++i)
    for (int p = A.outerIndexPtr()[i]; p < A.outerIndexPtr()[i + 1]; ++p)
      if (A.innerIndexPtr()[p] == i) diag[i] = p;
}

void gauss_seidel(const SpMat& A, const std::vector<int>& diag, const Vec& b, Vec& x, bool forward) {
  const int n = static_cast<int>(A.rows());
  const int* outer = A.outerIndexPtr();
  const int* inner = A.innerIndexPtr();
  const double* val = A.valuePtr();
  for (int k = 0; k < n; ++k) {
    int i = forward ? k : n - 1 - k;
    double s = b[i];
    for (int p = outer[i]; p < outer[i + 1]; ++p) s -= val[p] * x[inner[p]];
    s += val[diag[i]] * x[i];
    x[i] = s / val[diag[i]];
  }
}
}  // namespace

void MultigridSolver::setup(const SpMat& A0) {
  levels_[0]->A = A0;
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    Level& L = *levels_[l];
    if (l > 0) {
      const Level& F = *levels_[l - 1];
      SpMat AP = F.A * F.P;
      L.A = F.R * AP;
      L.A.prune(0.0);
    }
    find_diagonal(L.A, L.diag);
  }
  coarse_->factorize(levels_.back()->A);
  for (auto& L : levels_) {
    const auto n = L->A.rows();
    L->b.setZero(n);
    L->x.setZero(n);
    L->r.setZero(n);
  }
}

void MultigridSolver::vcycle(std::size_t l, const Vec& b, Vec& x) {
  Level& L = *levels_[l];
  if (l + 1 == levels_.size()) {
    coarse_->solve(b, x);
    return;
  }
  x.setZero(b.size());
  for (int s = 0; s < 2; ++s) gauss_seidel(L.A, L.diag, b, x, true);
  L.r = b - L.A * x;
  Level& C = *levels_[l + 1];
  C.b = L.R * L.r;
  vcycle(l + 1, C.b, C.x);
  x += L.P * C.x;
  for (int s = 0; s < 2; ++s) gauss_seidel(L.A, L.diag, b, x, false);
}
int MultigridSolver::solve(const Vec& b, Vec& x, double rel_tol, int max_iter) {
  const SpMat& A = levels_[0]->A;
  const double bn = b.norm();
  if (x.size() != b.size()) x.setZero(b.size());
  if (bn == 0.0) {
    x.setZero();
    return 0;
  }
  if (levels_.size() == 1) {
    coarse_->solve(b, x);
    return 1;
  }
  Vec r = b - A * x;
  if (r.norm() <= rel_tol * bn) return 0;
  Vec rhat = r, p = Vec::Zero(b.size()), v = Vec::Zero(b.size());
  Vec y(b.size()), z(b.size()), s(b.size()), t(b.size());
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  for (int k = 1; k <= max_iter; ++k) {
    double rho_new = rhat.dot(r);
    if (rho_new == 0.0 || !std::isfinite(rho_new)) throw NumericalFailure("linear solve", "BiCGSTAB breakdown");
    double beta = (rho_new / rho) * (alpha / omega);
    p = r + beta * (p - omega * v);
    vcycle(0, p, y);
    v = A * y;
    alpha = rho_new / rhat.dot(v);
    s = r - alpha * v;
    if (s.norm() <= rel_tol * bn) {
      x += alpha * y;
      return k;
    }
    vcycle(0, s, z);
    t = A * z;
    omega = t.dot(s) / t.dot(t);
    x += alpha * y + omega * z;
    r = s - omega * t;
    rho = rho_new;
    if (r.norm() <= rel_tol * bn) return k;
    if (!std::isfinite(omega) || omega == 0.0) throw NumericalFailure("linear solve", "BiCGSTAB stagnation");
  }
  throw NumericalFailure("linear solve", "BiCGSTAB did not reach the tolerance");
}

}  // namespace soliton::detail
