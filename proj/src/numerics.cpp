#include "gradmech/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gradmech/errors.hpp"

namespace gradmech {

// ---------------------------------------------------------------------------
// RK4

double Trajectory::drift(std::size_t index) const {
  double worst = 0.0;
  if (conserved.empty()) return worst;
  const double start = conserved.front().at(index);
  for (const auto& row : conserved) worst = std::max(worst, std::fabs(row.at(index) - start));
  return worst;
}

Trajectory rk4(const OdeProblem& problem, const StepObserver& observer) {
  if (!(problem.dt > 0.0)) throw InvalidArgument("rk4: dt must be positive");
  if (!(problem.t_end > problem.t0)) throw InvalidArgument("rk4: empty time span");
  if (!problem.rhs) throw InvalidArgument("rk4: missing right-hand side");
  const std::size_t dim = problem.initial.size();
  const double span = problem.t_end - problem.t0;
  const auto steps = static_cast<std::size_t>(std::ceil(span / problem.dt - 1e-9));

  Trajectory traj;
  traj.integrator = "rk4";
  traj.dt = problem.dt;
  traj.time.reserve(steps + 1);
  traj.states.reserve(steps + 1);

  std::vector<double> y = problem.initial;
  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  double t = problem.t0;
  traj.time.push_back(t);
  traj.states.push_back(y);
  if (observer) observer(0, t, y);

  for (std::size_t step = 1; step <= steps; ++step) {
    const double target = step == steps ? problem.t_end : problem.t0 + static_cast<double>(step) * problem.dt;
    const double h = target - t;
    problem.rhs(t, y, k1);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    problem.rhs(t + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    problem.rhs(t + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + h * k3[i];
    problem.rhs(t + h, tmp, k4);
    for (std::size_t i = 0; i < dim; ++i) {
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(y[i])) {
        throw NonFinite("rk4: state component " + std::to_string(i) + " became non-finite at t = " +
                        format_number(target));
      }
    }
    t = target;
    traj.time.push_back(t);
    traj.states.push_back(y);
    if (observer) observer(step, t, y);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Stencils

std::vector<double> central_stencil(int order) {
  switch (order) {
    case 0: return {1.0};
    case 1: return {-0.5, 0.0, 0.5};
    case 2: return {1.0, -2.0, 1.0};
    case 3: return {-0.5, 1.0, 0.0, -1.0, 0.5};
    case 4: return {1.0, -4.0, 6.0, -4.0, 1.0};
    case 5: return {-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5};
    case 6: return {1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0};
    default: throw InvalidArgument("central_stencil: unsupported derivative order " + std::to_string(order));
  }
}

Grid2D Grid2D::span(double a, double b, std::size_t nx, double c, double d, std::size_t ny) {
  if (nx < 2 || ny < 2) throw InvalidArgument("Grid2D::span: need at least two nodes per direction");
  return Grid2D{nx, ny, a, (b - a) / static_cast<double>(nx - 1), c, (d - c) / static_cast<double>(ny - 1)};
}

namespace {

// d/dx along a strided line of n values; second-order everywhere.
void first_derivative(const double* f, std::size_t n, std::size_t stride, double h, double* out) {
  for (std::size_t i = 1; i + 1 < n; ++i) out[i * stride] = (f[(i + 1) * stride] - f[(i - 1) * stride]) / (2.0 * h);
  out[0] = (-3.0 * f[0] + 4.0 * f[stride] - f[2 * stride]) / (2.0 * h);
  const std::size_t l = n - 1;
  out[l * stride] = (3.0 * f[l * stride] - 4.0 * f[(l - 1) * stride] + f[(l - 2) * stride]) / (2.0 * h);
}

void second_derivative(const double* f, std::size_t n, std::size_t stride, double h, double* out) {
  const double h2 = h * h;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out[i * stride] = (f[(i + 1) * stride] - 2.0 * f[i * stride] + f[(i - 1) * stride]) / h2;
  }
  out[0] = (2.0 * f[0] - 5.0 * f[stride] + 4.0 * f[2 * stride] - f[3 * stride]) / h2;
  const std::size_t l = n - 1;
  out[l * stride] =
      (2.0 * f[l * stride] - 5.0 * f[(l - 1) * stride] + 4.0 * f[(l - 2) * stride] - f[(l - 3) * stride]) / h2;
}

void check_grid(const Grid2D& grid, std::span<const double> f, std::size_t min_nodes) {
  if (grid.nx < min_nodes || grid.ny < min_nodes) {
    throw InvalidArgument("finite differences need at least " + std::to_string(min_nodes) + " nodes per direction");
  }
  if (f.size() != grid.size()) throw InvalidArgument("field size does not match the grid");
}

}  // namespace

void fd_gradient(const Grid2D& grid, std::span<const double> f, std::vector<double>& fx, std::vector<double>& fy) {
  check_grid(grid, f, 3);
  fx.assign(grid.size(), 0.0);
  fy.assign(grid.size(), 0.0);
  for (std::size_t j = 0; j < grid.ny; ++j) first_derivative(f.data() + j, grid.nx, grid.ny, grid.hx, fx.data() + j);
  for (std::size_t i = 0; i < grid.nx; ++i) {
    first_derivative(f.data() + i * grid.ny, grid.ny, 1, grid.hy, fy.data() + i * grid.ny);
  }
}

Partials fd_partials(const Grid2D& grid, std::span<const double> f) {
  check_grid(grid, f, 4);
  Partials p;
  fd_gradient(grid, f, p.fx, p.fy);
  p.fxx.assign(grid.size(), 0.0);
  p.fyy.assign(grid.size(), 0.0);
  p.fxy.assign(grid.size(), 0.0);
  for (std::size_t j = 0; j < grid.ny; ++j) {
    second_derivative(f.data() + j, grid.nx, grid.ny, grid.hx, p.fxx.data() + j);
    first_derivative(p.fy.data() + j, grid.nx, grid.ny, grid.hx, p.fxy.data() + j);
  }
  for (std::size_t i = 0; i < grid.nx; ++i) {
    second_derivative(f.data() + i * grid.ny, grid.ny, 1, grid.hy, p.fyy.data() + i * grid.ny);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Discrete action

ActionDiscretization::ActionDiscretization(Expr lagrangian, int order, int components, double t0, double dt,
                                           std::size_t samples)
    : lagrangian_(std::move(lagrangian)),
      order_(order),
      components_(components),
      t0_(t0),
      dt_(dt),
      samples_(samples),
      halo_(static_cast<std::size_t>((order + 1) / 2)),
      chart_(Chart::qjet("q", components, order)) {
  if (order < 0 || order > 6) throw InvalidArgument("ActionDiscretization: order must be in 0..6");
  if (components < 1) throw InvalidArgument("ActionDiscretization: need at least one component");
  if (!(dt > 0.0)) throw InvalidArgument("ActionDiscretization: dt must be positive");
  if (samples < static_cast<std::size_t>(4 * halo_ + 3)) {
    throw InvalidArgument("ActionDiscretization: too few samples for the jet order");
  }
  chart_.validate(lagrangian_);

  for (int i = 0; i <= order; ++i) {
    std::vector<double> s = central_stencil(i);
    const std::size_t pad = halo_ - (s.size() - 1) / 2;
    std::vector<double> padded(2 * halo_ + 1, 0.0);
    const double scale = std::pow(dt, -i);
    for (std::size_t k = 0; k < s.size(); ++k) padded[pad + k] = s[k] * scale;
    stencils_.push_back(std::move(padded));
  }

  const auto names = chart_.names();
  std::vector<Expr> partials;
  for (const auto& name : names) partials.push_back(diff(lagrangian_, name));
  value_ = Program({lagrangian_}, names);
  partials_ = Program(partials, names);
}

double ActionDiscretization::weight(std::size_t n) const {
  return (n == halo_ || n == samples_ - 1 - halo_) ? 0.5 : 1.0;
}

std::vector<double> ActionDiscretization::jets_at(const std::vector<std::vector<double>>& curve,
                                                  std::size_t n) const {
  std::vector<double> jets;
  jets.reserve(static_cast<std::size_t>(components_ * (order_ + 1)));
  for (int a = 0; a < components_; ++a) {
    for (int i = 0; i <= order_; ++i) {
      const auto& s = stencils_[static_cast<std::size_t>(i)];
      double v = 0.0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] != 0.0) v += s[k] * curve[n - halo_ + k][static_cast<std::size_t>(a)];
      }
      jets.push_back(v);
    }
  }
  return jets;
}

double ActionDiscretization::action(const std::vector<std::vector<double>>& curve) const {
  if (curve.size() != samples_) throw InvalidArgument("action: wrong number of samples");
  double sum = 0.0;
  for (std::size_t n = halo_; n + halo_ < samples_; ++n) sum += weight(n) * dt_ * value_(jets_at(curve, n))[0];
  return sum;
}

std::vector<std::vector<double>> ActionDiscretization::gradient(const std::vector<std::vector<double>>& curve) const {
  if (curve.size() != samples_) throw InvalidArgument("action gradient: wrong number of samples");
  std::vector<std::vector<double>> grad(samples_, std::vector<double>(static_cast<std::size_t>(components_), 0.0));
  for (std::size_t n = halo_; n + halo_ < samples_; ++n) {
    const std::vector<double> dl = partials_(jets_at(curve, n));
    const double w = weight(n) * dt_;
    std::size_t slot = 0;
    for (int a = 0; a < components_; ++a) {
      for (int i = 0; i <= order_; ++i, ++slot) {
        const auto& s = stencils_[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < s.size(); ++k) {
          if (s[k] != 0.0) grad[n - halo_ + k][static_cast<std::size_t>(a)] += w * dl[slot] * s[k];
        }
      }
    }
  }
  return grad;
}

std::vector<std::vector<double>> action_gradient(const ActionDiscretization& a,
                                                 const std::vector<std::vector<double>>& curve) {
  return a.gradient(curve);
}

// ---------------------------------------------------------------------------
// Dense linear algebra

namespace {

double max_row_norm(const Matrix& a) {
  double m = 0.0;
  for (const auto& row : a) {
    double s = 0.0;
    for (double v : row) s += std::fabs(v);
    m = std::max(m, s);
  }
  return m;
}

// In-place LU with partial pivoting; returns the permutation sign.
int lu_factor(Matrix& a, std::vector<std::size_t>& perm) {
  const std::size_t n = a.size();
  const double threshold = 1e-13 * max_row_norm(a);
  perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  int sign = 1;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::fabs(a[i][k]) > std::fabs(a[p][k])) p = i;
    }
    if (!(std::fabs(a[p][k]) > threshold)) {
      throw SingularJacobian("matrix is singular to working precision (pivot " + std::to_string(k) + ")");
    }
    if (p != k) {
      std::swap(a[p], a[k]);
      std::swap(perm[p], perm[k]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double l = a[i][k] / a[k][k];
      a[i][k] = l;
      if (l == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) a[i][j] -= l * a[k][j];
    }
  }
  return sign;
}

std::vector<double> lu_solve(const Matrix& lu, const std::vector<std::size_t>& perm, const std::vector<double>& b) {
  const std::size_t n = lu.size();
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[perm[i]];
    for (std::size_t j = 0; j < i; ++j) s -= lu[i][j] * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu[i][j] * x[j];
    x[i] = s / lu[i][i];
  }
  return x;
}

void check_square(const Matrix& a) {
  for (const auto& row : a) {
    if (row.size() != a.size()) throw InvalidArgument("matrix must be square");
  }
}

}  // namespace

std::vector<double> dense_solve(Matrix a, std::vector<double> b) {
  check_square(a);
  if (b.size() != a.size()) throw InvalidArgument("dense_solve: right-hand side size mismatch");
  if (a.empty()) return {};
  std::vector<std::size_t> perm;
  lu_factor(a, perm);
  return lu_solve(a, perm, b);
}

double determinant(Matrix a) {
  check_square(a);
  std::vector<std::size_t> perm;
  int sign = 0;
  try {
    sign = lu_factor(a, perm);
  } catch (const SingularJacobian&) {
    return 0.0;
  }
  double det = sign;
  for (std::size_t i = 0; i < a.size(); ++i) det *= a[i][i];
  return det;
}

double condition_number(const Matrix& a) {
  check_square(a);
  const std::size_t n = a.size();
  if (n == 0) return 1.0;
  double norm = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::fabs(a[i][j]);
    norm = std::max(norm, s);
  }
  Matrix lu = a;
  std::vector<std::size_t> perm;
  try {
    lu_factor(lu, perm);
  } catch (const SingularJacobian&) {
    return std::numeric_limits<double>::infinity();
  }
  double inv_norm = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const auto col = lu_solve(lu, perm, e);
    double s = 0.0;
    for (double v : col) s += std::fabs(v);
    inv_norm = std::max(inv_norm, s);
  }
  return norm * inv_norm;
}

// ---------------------------------------------------------------------------
// Banded LU

BandMatrix::BandMatrix(std::size_t n, std::size_t lower, std::size_t upper)
    : n_(n), lower_(lower), upper_(upper), width_(2 * lower + upper + 1), data_(n * width_, 0.0) {}

double& BandMatrix::at(std::size_t i, std::size_t j) {
  if (i >= n_ || j >= n_ || j + lower_ < i || j > i + upper_) throw InvalidArgument("BandMatrix: entry outside band");
  return data_[i * width_ + (j + lower_ - i)];
}

double BandMatrix::get(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_ || j + lower_ < i || j > i + upper_) return 0.0;
  return data_[i * width_ + (j + lower_ - i)];
}

std::vector<double> BandMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > lower_ ? i - lower_ : 0;
    const std::size_t hi = std::min(n_ - 1, i + upper_);
    for (std::size_t j = lo; j <= hi; ++j) y[i] += get(i, j) * x[j];
  }
  return y;
}

std::vector<double> BandMatrix::solve(std::vector<double> b) const {
  if (b.size() != n_) throw InvalidArgument("BandMatrix::solve: right-hand side size mismatch");
  std::vector<double> a = data_;
  const std::size_t reach = upper_ + lower_;  // upper bandwidth after pivoting
  auto ref = [&](std::size_t i, std::size_t j) -> double& { return a[i * width_ + (j + lower_ - i)]; };

  double row_norm = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < width_; ++k) s += std::fabs(a[i * width_ + k]);
    row_norm = std::max(row_norm, s);
  }
  const double threshold = 1e-13 * row_norm;

  for (std::size_t k = 0; k < n_; ++k) {
    const std::size_t last_row = std::min(n_ - 1, k + lower_);
    const std::size_t last_col = std::min(n_ - 1, k + reach);
    std::size_t p = k;
    for (std::size_t i = k + 1; i <= last_row; ++i) {
      if (std::fabs(ref(i, k)) > std::fabs(ref(p, k))) p = i;
    }
    if (!(std::fabs(ref(p, k)) > threshold)) {
      throw SingularJacobian("banded matrix is singular to working precision (pivot " + std::to_string(k) + ")");
    }
    if (p != k) {
      for (std::size_t j = k; j <= last_col; ++j) {
        // Row p may not store columns beyond p + reach; those are zero in both rows.
        std::swap(ref(k, j), ref(p, j));
      }
      std::swap(b[k], b[p]);
    }
    const double pivot = ref(k, k);
    for (std::size_t i = k + 1; i <= last_row; ++i) {
      const double l = ref(i, k) / pivot;
      if (l == 0.0) continue;
      ref(i, k) = 0.0;
      for (std::size_t j = k + 1; j <= last_col; ++j) ref(i, j) -= l * ref(k, j);
      b[i] -= l * b[k];
    }
  }
  std::vector<double> x(n_);
  for (std::size_t i = n_; i-- > 0;) {
    double s = b[i];
    const std::size_t last_col = std::min(n_ - 1, i + reach);
    for (std::size_t j = i + 1; j <= last_col; ++j) s -= ref(i, j) * x[j];
    x[i] = s / ref(i, i);
  }
  return x;
}

}  // namespace gradmech
