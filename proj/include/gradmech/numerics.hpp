#pragma once

// Shared numerical kernels: fixed-step RK4, finite-difference stencils on
// uniform grids, the discrete-action gradient, and dense/banded LU solves.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gradmech/chart.hpp"
#include "gradmech/expr.hpp"
#include "gradmech/program.hpp"

namespace gradmech {

// ---------------------------------------------------------------------------
// ODE integration

using RhsFn = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct OdeProblem {
  RhsFn rhs;
  std::vector<double> initial;
  double t0 = 0.0;
  double t_end = 1.0;
  double dt = 1e-3;
};

struct Trajectory {
  std::vector<double> time;
  std::vector<std::vector<double>> states;
  std::vector<std::string> state_names;
  std::string integrator;
  double dt = 0.0;
  std::vector<std::string> conserved_names;
  std::vector<std::vector<double>> conserved;  // one row per sample

  /// Largest |q(t) - q(t0)| for conserved quantity `index`.
  double drift(std::size_t index) const;
};

/// Called after every accepted step with the step count, time and state.
using StepObserver = std::function<void(std::size_t step, double t, std::span<const double> y)>;

/// Classical fourth-order Runge-Kutta with a fixed step; the last step is
/// shortened to land on t_end. Throws NonFinite when the state overflows.
Trajectory rk4(const OdeProblem& problem, const StepObserver& observer = {});

// ---------------------------------------------------------------------------
// Finite differences

/// Second-order central stencil for d^order/dt^order, coefficients at offsets
/// -h..h (unscaled: divide by dt^order). Supports order 0..6.
std::vector<double> central_stencil(int order);

struct Grid2D {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double x0 = 0.0;
  double hx = 1.0;
  double y0 = 0.0;
  double hy = 1.0;

  std::size_t index(std::size_t i, std::size_t j) const { return i * ny + j; }
  std::size_t size() const { return nx * ny; }
  double x(std::size_t i) const { return x0 + static_cast<double>(i) * hx; }
  double y(std::size_t j) const { return y0 + static_cast<double>(j) * hy; }
  bool interior(std::size_t i, std::size_t j) const { return i > 0 && j > 0 && i + 1 < nx && j + 1 < ny; }

  static Grid2D span(double a, double b, std::size_t nx, double c, double d, std::size_t ny);
};

struct Partials {
  std::vector<double> fx, fy, fxx, fyy, fxy;
};

/// Second-order partials: central in the interior, one-sided second-order on
/// the edges. Exact on quadratics.
Partials fd_partials(const Grid2D& grid, std::span<const double> f);

/// First partials only (same stencils as fd_partials).
void fd_gradient(const Grid2D& grid, std::span<const double> f, std::vector<double>& fx, std::vector<double>& fy);

// ---------------------------------------------------------------------------
// Discrete action

/// Trapezoid-rule action sum over a uniform time grid, with jets taken from
/// central differences of the sampled curve. The Lagrangian is over the chart
/// Chart::qjet("q", components, order).
class ActionDiscretization {
 public:
  ActionDiscretization(Expr lagrangian, int order, int components, double t0, double dt, std::size_t samples);

  int order() const { return order_; }
  int components() const { return components_; }
  std::size_t samples() const { return samples_; }
  double dt() const { return dt_; }
  double time(std::size_t n) const { return t0_ + static_cast<double>(n) * dt_; }
  const Chart& chart() const { return chart_; }

  /// Stencil half-width; the action sums nodes [halo, samples - halo).
  std::size_t halo() const { return halo_; }
  /// Samples whose gradient entries only see full-weight quadrature nodes.
  std::size_t first_consistent() const { return 2 * halo_ + 1; }
  std::size_t last_consistent() const { return samples_ - 2 - 2 * halo_; }

  /// curve[n][A]: sample n of component A.
  double action(const std::vector<std::vector<double>>& curve) const;
  /// Exact gradient of action() with respect to every sample value; the
  /// chain rule runs through the stencils with symbolic partials of L.
  std::vector<std::vector<double>> gradient(const std::vector<std::vector<double>>& curve) const;

 private:
  std::vector<double> jets_at(const std::vector<std::vector<double>>& curve, std::size_t n) const;
  double weight(std::size_t n) const;

  Expr lagrangian_;
  int order_;
  int components_;
  double t0_;
  double dt_;
  std::size_t samples_;
  std::size_t halo_;
  Chart chart_;
  std::vector<std::vector<double>> stencils_;  // per derivative order, scaled by dt^-order
  Program value_;
  Program partials_;  // dL/dq^A_i in chart order
};

std::vector<std::vector<double>> action_gradient(const ActionDiscretization& a,
                                                 const std::vector<std::vector<double>>& curve);

// ---------------------------------------------------------------------------
// Linear algebra

using Matrix = std::vector<std::vector<double>>;

/// Partial-pivot LU solve. Throws SingularJacobian when a pivot falls below
/// 1e-13 times the largest row norm.
std::vector<double> dense_solve(Matrix a, std::vector<double> b);

double determinant(Matrix a);

/// 1-norm condition number; +inf when singular.
double condition_number(const Matrix& a);

/// Banded matrix with `lower` sub- and `upper` super-diagonals.
class BandMatrix {
 public:
  BandMatrix(std::size_t n, std::size_t lower, std::size_t upper);

  std::size_t size() const { return n_; }
  double& at(std::size_t i, std::size_t j);
  double get(std::size_t i, std::size_t j) const;
  void add(std::size_t i, std::size_t j, double v) { at(i, j) += v; }
  std::vector<double> multiply(std::span<const double> x) const;

  /// Partial-pivot band LU; same singularity criterion as dense_solve.
  std::vector<double> solve(std::vector<double> b) const;

 private:
  std::size_t n_;
  std::size_t lower_;
  std::size_t upper_;
  std::size_t width_;
  std::vector<double> data_;  // row-major, row i stores columns [i - lower, i + upper + lower]
};

}  // namespace gradmech
