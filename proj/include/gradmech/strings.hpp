#pragma once

// Strings: parameterized surfaces (t, s) -> x(t, s), bivector Lagrangians,
// their Euler-Lagrange residuals, and the Plateau problem for graphs.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gradmech/expr.hpp"
#include "gradmech/numerics.hpp"

namespace gradmech {

struct SurfaceGrid {
  int m = 0;
  Grid2D grid;                          // t along grid.x, s along grid.y
  std::vector<std::vector<double>> x;   // x[sigma][grid.index(i, j)]

  /// Throws InvalidArgument unless P, Q >= 4 and every value is finite.
  void validate() const;
};

/// Samples f_sigma(t, s) on [t0, t1] x [s0, s1] with nt x ns nodes.
SurfaceGrid sample_surface(const std::vector<Expr>& components, const std::string& t, const std::string& s,
                           double t0, double t1, std::size_t nt, double s0, double s1, std::size_t ns);

/// "x1".."xm" and "xd{mu}_{nu}" for mu < nu.
std::string position_name(int sigma);
std::string bivector_name(int mu, int nu);
std::vector<std::pair<int, int>> bivector_pairs(int m);  // (mu, nu), mu < nu, 1-based

struct BivectorLagrangian {
  int m = 0;
  Expr L;

  /// Validates that L uses only x1..xm and xd{mu}_{nu} with mu < nu.
  BivectorLagrangian(int m, Expr L);
};

/// sqrt(sum_{mu<nu} (xd{mu}_{nu})^2).
BivectorLagrangian area_lagrangian(int m);

/// Components xd^{mu nu} = x^mu_t x^nu_s - x^mu_s x^nu_t on every node, in the
/// order of bivector_pairs(m). Central differences inside, one-sided
/// second-order differences on the edges.
std::vector<std::vector<double>> prolong(const SurfaceGrid& S);

struct ResidualField {
  Grid2D grid;
  std::vector<std::vector<double>> r;  // r[sigma][node]; only interior nodes are meaningful

  double max_interior() const;
};

/// r_sigma = dL/dx^sigma - sum_mu ( x^mu_t d_s F_{mu sigma} - x^mu_s d_t F_{mu sigma} ),
/// F the antisymmetric extension of dL/dxd^{mu nu}.
ResidualField el_residual(const BivectorLagrangian& L, const SurfaceGrid& S);

struct GraphSurface {
  Grid2D grid;
  std::vector<double> z;

  static GraphSurface sample(const Expr& f, const std::string& x, const std::string& y, double a, double b,
                             std::size_t nx, double c, double d, std::size_t ny);
  /// Embedding (t, s) -> (t, s, z(t, s)).
  SurfaceGrid embed() const;
};

/// (1+z_x^2) z_yy - 2 z_x z_y z_xy + (1+z_y^2) z_xx with central differences,
/// on interior nodes (zero on the boundary).
std::vector<double> minimal_surface_residual(const GraphSurface& z);
double max_interior(const Grid2D& grid, const std::vector<double>& field);

struct PlateauOptions {
  double tolerance = 1e-10;
  int max_iter = 50;
  std::optional<std::vector<double>> initial_guess;  // full grid; boundary entries are ignored
};

struct PlateauResult {
  GraphSurface surface;
  std::vector<std::pair<int, double>> log;  // (iteration, max |residual|); iteration 0 is the initial guess
  int iterations = 0;
  double residual = 0.0;
};

/// Harmonic (discrete Laplace) interpolation of the boundary values.
GraphSurface harmonic_interpolation(const GraphSurface& boundary);

/// Damped Newton on the discrete minimal-surface operator with Dirichlet data
/// taken from the boundary nodes of `boundary`. Throws NoConvergence and
/// SingularJacobian.
PlateauResult solve_plateau(const GraphSurface& boundary, const PlateauOptions& options = {});

/// Max over interior nodes of | -W^3 r_3 - MS(z) |, where r_3 is the string
/// residual of the embedded graph under the area Lagrangian, MS the
/// minimal-surface operator and W = sqrt(1 + z_x^2 + z_y^2).
double consistency_check(const BivectorLagrangian& area, const GraphSurface& z);

/// Cell-averaged area sum_cells W hx hy and its exact gradient in z.
double discrete_area(const GraphSurface& z);
std::vector<double> discrete_area_gradient(const GraphSurface& z);

// CSV (header t,s,x1..xm; one row per node) and JSON import/export.
void write_csv(std::ostream& out, const SurfaceGrid& S);
SurfaceGrid read_surface_csv(std::istream& in);
void write_csv(std::ostream& out, const GraphSurface& z);
GraphSurface read_graph_csv(std::istream& in);
std::string to_json(const SurfaceGrid& S);
SurfaceGrid surface_from_json(const std::string& text);
std::string to_json(const GraphSurface& z);
GraphSurface graph_from_json(const std::string& text);
void write_log_csv(std::ostream& out, const std::vector<std::pair<int, double>>& log);

/// Decimal text with 17 significant digits (round-trips every double).
std::string csv_number(double v);

}  // namespace gradmech
