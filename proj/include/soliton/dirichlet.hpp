#pragma once

#include <optional>
#include <string>
#include <vector>

#include "soliton/grid.hpp"

namespace soliton {

struct SolverConfig {
  double h = 1.0 / 64.0;
  std::vector<double> sigma_schedule{0.25, 0.5, 0.75, 1.0};
  std::optional<double> theta_cap;  // default (1 - tanh d) / 2
  double damping = 0.7;
  double tolerance = 1e-8;          // residual <= tolerance * (1 + |D^2 u|)
  int max_iterations = 200;         // nonlinear steps per grid level and sigma stage
  double newton_switch = 1e-2;      // Newton steps once the residual is below this; 0 = Picard only
  double linear_tolerance = 1e-10;
  std::size_t direct_limit = 120000;  // unknowns solved by sparse LU instead of multigrid
  bool grid_sequencing = true;
  std::size_t sequencing_start = 4000;  // unknowns on the coarsest sequencing level
  double initial_slope = 0.5;
  std::size_t max_nodes = 8000000;

  void validate() const;
};

enum class SolveStatus { converged, cap_bound, diverged, not_strict, too_large };
const char* to_string(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::diverged;
  std::string message;
  GridField field;
  int picard_steps = 0;
  int newton_steps = 0;
  int linear_iterations = 0;
  std::vector<double> sigma_stages;  // sigma values completed on the finest level
  std::vector<double> level_spacings;
  double residual_sup = 0.0;
  double residual_l2 = 0.0;
  double hessian_sup = 0.0;
  double theta_cap = 0.0;
  double max_gradient = 0.0;
  bool cap_active = false;
  double seconds = 0.0;
  bool ok() const { return status == SolveStatus::converged; }
};

// g^ij u_ij = 1 + c v with u = boundary_value on the boundary, by damped Picard
// (frozen g^ij) with Newton steps near convergence.
SolveResult solve_dirichlet(const ConvexDomain& domain, double c, double boundary_value,
                            const SolverConfig& config);
SolveResult solve_dirichlet(std::shared_ptr<const ConvexDomain> domain, double c,
                            double boundary_value, const SolverConfig& config);

// Solves g^ij u_ij = sigma (1 + c v) on an existing grid starting from 'start'.
SolveResult solve_on_grid(std::shared_ptr<const Grid> grid, double c, double sigma, GridField start,
                          const SolverConfig& config);

struct ResidualField {
  std::vector<double> values;  // per unknown
  double sup = 0.0;
  double l2 = 0.0;             // sqrt(h^2 sum r^2)
  double hessian_sup = 0.0;
};

// g^ij u_ij - sigma (1 + c v) with the solver's stencils
ResidualField residual_field(const GridField& u, double c, double sigma = 1.0);

struct GradientCertificate {
  double max_gradient = 0.0;
  double bound = 0.0;  // tanh(d)
  double max_ring = 0.0;   // max |Du|^2 over unknowns next to the boundary
  double max_inner = 0.0;  // max |Du|^2 over the rest
  Vec2 location{};
  bool bound_ok = false;
  bool maximum_principle_ok = false;
  bool passed() const { return bound_ok && maximum_principle_ok; }
};
GradientCertificate gradient_certificate(const GridField& u);

struct ConvexityCertificate {
  double min_eigenvalue = 0.0;
  double tolerance = 0.0;
  Vec2 location{};
  Vec2 eigenvector{};
  bool passed = false;
};
ConvexityCertificate convexity_certificate(const GridField& u, std::optional<double> tol = std::nullopt);

struct LevelSetReport {
  std::size_t samples = 0;
  std::size_t skipped_critical = 0;
  double sup_residual = 0.0;     // H u_g + u_gg / (1 - u_g^2) - (1 + c v)
  double sup_ugg_mismatch = 0.0; // (1 - u_g^2)(1 + c v - H u_g) versus direct u_gg
  std::vector<Vec2> points;
  std::vector<double> residuals;
};
LevelSetReport level_set_identity(const GridField& u, double level, double c,
                                  double min_gradient = 1e-3);

struct LaplacianReport {
  double sup_residual = 0.0;
  double l2_residual = 0.0;
  std::size_t nodes = 0;
  std::vector<double> operator_values;  // divergence-form Delta_M u at checked unknowns
};
// (1/v) div(Du / v) in flux form against 1/v^2 + c/v
LaplacianReport induced_laplacian_check(const GridField& u, double c);

enum class Relation { super, sub };
struct ComparisonReport {
  bool conclusive = false;
  bool holds = false;
  double hypothesis_violation_fraction = 0.0;
  double boundary_bound = 0.0;  // sup (resp. inf) of u - ubar over the cut points
  double interior_extreme = 0.0;
  double tolerance = 0.0;
};
// super: L ubar <= 1 + c v_ubar; checks u - ubar <= sup_boundary(u - ubar) + 5h
ComparisonReport comparison_check(const GridField& u, const GridField& ubar, Relation rel, double c,
                                  std::optional<double> sign_tolerance = std::nullopt);

void write_field_csv(const GridField& u, double c, const std::string& path);

}  // namespace soliton
