#include "gradmech/strings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "gradmech/errors.hpp"
#include "gradmech/program.hpp"

namespace gradmech {

// ---------------------------------------------------------------------------
// Surfaces and bivectors

void SurfaceGrid::validate() const {
  if (m < 1) throw InvalidArgument("surface needs at least one component");
  if (grid.nx < 5 || grid.ny < 5) throw InvalidArgument("surface grid needs at least 5 x 5 nodes");
  if (!(grid.hx > 0.0) || !(grid.hy > 0.0)) throw InvalidArgument("surface grid spacing must be positive");
  if (x.size() != static_cast<std::size_t>(m)) throw InvalidArgument("surface has the wrong number of components");
  for (const auto& comp : x) {
    if (comp.size() != grid.size()) throw InvalidArgument("surface component does not match the grid");
    for (double v : comp) {
      if (!std::isfinite(v)) throw InvalidArgument("surface contains a non-finite value");
    }
  }
}

SurfaceGrid sample_surface(const std::vector<Expr>& components, const std::string& t, const std::string& s,
                           double t0, double t1, std::size_t nt, double s0, double s1, std::size_t ns) {
  SurfaceGrid S;
  S.m = static_cast<int>(components.size());
  S.grid = Grid2D::span(t0, t1, nt, s0, s1, ns);
  const Program p(components, {t, s});
  S.x.assign(components.size(), std::vector<double>(S.grid.size()));
  std::vector<double> out(components.size());
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < ns; ++j) {
      const double in[2] = {S.grid.x(i), S.grid.y(j)};
      p.run(in, out);
      for (std::size_t c = 0; c < out.size(); ++c) S.x[c][S.grid.index(i, j)] = out[c];
    }
  }
  S.validate();
  return S;
}

std::string position_name(int sigma) { return "x" + std::to_string(sigma); }

std::string bivector_name(int mu, int nu) { return "xd" + std::to_string(mu) + "_" + std::to_string(nu); }

std::vector<std::pair<int, int>> bivector_pairs(int m) {
  std::vector<std::pair<int, int>> out;
  for (int mu = 1; mu <= m; ++mu) {
    for (int nu = mu + 1; nu <= m; ++nu) out.emplace_back(mu, nu);
  }
  return out;
}

BivectorLagrangian::BivectorLagrangian(int m_, Expr L_) : m(m_), L(std::move(L_)) {
  if (m < 2) throw InvalidArgument("bivector Lagrangian needs m >= 2");
  std::vector<std::string> allowed;
  for (int s = 1; s <= m; ++s) allowed.push_back(position_name(s));
  for (auto [mu, nu] : bivector_pairs(m)) allowed.push_back(bivector_name(mu, nu));
  for (const auto& v : free_variables(L)) {
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      throw ChartError("bivector Lagrangian uses '" + v + "'; expected x1..x" + std::to_string(m) +
                       " or xd{mu}_{nu} with mu < nu");
    }
  }
}

BivectorLagrangian area_lagrangian(int m) {
  Expr sum(0.0);
  for (auto [mu, nu] : bivector_pairs(m)) sum = sum + pow(Expr::var(bivector_name(mu, nu)), 2.0);
  return BivectorLagrangian(m, sqrt(sum));
}

namespace {

struct FirstPartials {
  std::vector<std::vector<double>> t, s;  // per component
};

FirstPartials surface_partials(const SurfaceGrid& S) {
  FirstPartials d;
  d.t.resize(S.m);
  d.s.resize(S.m);
  for (int c = 0; c < S.m; ++c) fd_gradient(S.grid, S.x[c], d.t[c], d.s[c]);
  return d;
}

}  // namespace

std::vector<std::vector<double>> prolong(const SurfaceGrid& S) {
  S.validate();
  const FirstPartials d = surface_partials(S);
  std::vector<std::vector<double>> out;
  for (auto [mu, nu] : bivector_pairs(S.m)) {
    std::vector<double> comp(S.grid.size());
    for (std::size_t k = 0; k < comp.size(); ++k) {
      comp[k] = d.t[mu - 1][k] * d.s[nu - 1][k] - d.s[mu - 1][k] * d.t[nu - 1][k];
    }
    out.push_back(std::move(comp));
  }
  return out;
}

double max_interior(const Grid2D& grid, const std::vector<double>& field) {
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < grid.nx; ++i) {
    for (std::size_t j = 1; j + 1 < grid.ny; ++j) {
      const double v = field[grid.index(i, j)];
      worst = std::max(worst, std::isfinite(v) ? std::fabs(v) : std::numeric_limits<double>::infinity());
    }
  }
  return worst;
}

double ResidualField::max_interior() const {
  double worst = 0.0;
  for (const auto& comp : r) worst = std::max(worst, gradmech::max_interior(grid, comp));
  return worst;
}

ResidualField el_residual(const BivectorLagrangian& L, const SurfaceGrid& S) {
  S.validate();
  if (S.m != L.m) throw InvalidArgument("Lagrangian and surface dimensions differ");
  const int m = S.m;
  const auto pairs = bivector_pairs(m);
  const std::size_t np = pairs.size();
  std::vector<std::string> slots;
  for (int s = 1; s <= m; ++s) slots.push_back(position_name(s));
  for (auto [mu, nu] : pairs) slots.push_back(bivector_name(mu, nu));

  // Outputs: dL/dx^sigma, F_p = dL/dxd^p, dF_p/dx^rho, dF_p/dxd^q.
  std::vector<Expr> outputs;
  for (int s = 1; s <= m; ++s) outputs.push_back(diff(L.L, position_name(s)));
  std::vector<Expr> F;
  for (auto [mu, nu] : pairs) F.push_back(diff(L.L, bivector_name(mu, nu)));
  outputs.insert(outputs.end(), F.begin(), F.end());
  for (const auto& f : F) {
    for (const auto& v : slots) outputs.push_back(diff(f, v));
  }
  const Program program(outputs, slots);

  std::vector<Partials> d;
  for (int c = 0; c < m; ++c) d.push_back(fd_partials(S.grid, S.x[c]));
  const std::size_t N = S.grid.size();
  ResidualField field{S.grid, std::vector<std::vector<double>>(m, std::vector<double>(N, 0.0))};
  std::vector<double> in(slots.size()), out(outputs.size());
  std::vector<double> xd(np), xd_t(np), xd_s(np), F_t(np), F_s(np);
  for (std::size_t i = 0; i < S.grid.nx; ++i) {
    for (std::size_t j = 0; j < S.grid.ny; ++j) {
      const std::size_t k = S.grid.index(i, j);
      for (std::size_t p = 0; p < np; ++p) {
        const int a = pairs[p].first - 1, b = pairs[p].second - 1;
        const Partials& A = d[a];
        const Partials& B = d[b];
        xd[p] = A.fx[k] * B.fy[k] - A.fy[k] * B.fx[k];
        xd_t[p] = A.fxx[k] * B.fy[k] + A.fx[k] * B.fxy[k] - A.fxy[k] * B.fx[k] - A.fy[k] * B.fxx[k];
        xd_s[p] = A.fxy[k] * B.fy[k] + A.fx[k] * B.fyy[k] - A.fyy[k] * B.fx[k] - A.fy[k] * B.fxy[k];
      }
      for (int s = 0; s < m; ++s) in[s] = S.x[s][k];
      for (std::size_t p = 0; p < np; ++p) in[m + p] = xd[p];
      try {
        program.run(in, out);
      } catch (const EvalError& e) {
        throw EvalError("at node (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what(),
                        e.subexpression());
      }
      // Chain rule for d_t F_p and d_s F_p.
      const std::size_t base = static_cast<std::size_t>(m) + np;
      for (std::size_t p = 0; p < np; ++p) {
        const double* g = &out[base + p * slots.size()];
        double ft = 0.0, fs = 0.0;
        for (int r = 0; r < m; ++r) {
          ft += g[r] * d[r].fx[k];
          fs += g[r] * d[r].fy[k];
        }
        for (std::size_t q = 0; q < np; ++q) {
          ft += g[m + q] * xd_t[q];
          fs += g[m + q] * xd_s[q];
        }
        F_t[p] = ft;
        F_s[p] = fs;
      }
      for (int s = 0; s < m; ++s) field.r[s][k] = out[s];
      for (std::size_t p = 0; p < np; ++p) {
        const int mu = pairs[p].first - 1, nu = pairs[p].second - 1;
        // F_{mu nu} = F_p enters r_nu; F_{nu mu} = -F_p enters r_mu.
        field.r[nu][k] -= d[mu].fx[k] * F_s[p] - d[mu].fy[k] * F_t[p];
        field.r[mu][k] += d[nu].fx[k] * F_s[p] - d[nu].fy[k] * F_t[p];
      }
    }
  }
  return field;
}

// ---------------------------------------------------------------------------
// Graph surfaces

GraphSurface GraphSurface::sample(const Expr& f, const std::string& x, const std::string& y, double a, double b,
                                  std::size_t nx, double c, double d, std::size_t ny) {
  GraphSurface g;
  g.grid = Grid2D::span(a, b, nx, c, d, ny);
  g.z.resize(g.grid.size());
  const Program p({f}, {x, y});
  double out = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const double in[2] = {g.grid.x(i), g.grid.y(j)};
      p.run(in, std::span<double>(&out, 1));
      g.z[g.grid.index(i, j)] = out;
    }
  }
  return g;
}

SurfaceGrid GraphSurface::embed() const {
  SurfaceGrid S;
  S.m = 3;
  S.grid = grid;
  S.x.assign(3, std::vector<double>(grid.size()));
  for (std::size_t i = 0; i < grid.nx; ++i) {
    for (std::size_t j = 0; j < grid.ny; ++j) {
      const std::size_t k = grid.index(i, j);
      S.x[0][k] = grid.x(i);
      S.x[1][k] = grid.y(j);
      S.x[2][k] = z[k];
    }
  }
  return S;
}

namespace {

void check_graph(const GraphSurface& g) {
  if (g.grid.nx < 3 || g.grid.ny < 3) throw InvalidArgument("graph surface needs at least 3 x 3 nodes");
  if (g.z.size() != g.grid.size()) throw InvalidArgument("graph values do not match the grid");
  for (double v : g.z) {
    if (!std::isfinite(v)) throw InvalidArgument("graph surface contains a non-finite value");
  }
}

struct Stencil {
  double zx, zy, zxx, zyy, zxy;
};

Stencil central(const Grid2D& g, const std::vector<double>& z, std::size_t i, std::size_t j) {
  const double c = z[g.index(i, j)];
  const double e = z[g.index(i + 1, j)], w = z[g.index(i - 1, j)];
  const double n = z[g.index(i, j + 1)], s = z[g.index(i, j - 1)];
  const double ne = z[g.index(i + 1, j + 1)], nw = z[g.index(i - 1, j + 1)];
  const double se = z[g.index(i + 1, j - 1)], sw = z[g.index(i - 1, j - 1)];
  return Stencil{(e - w) / (2.0 * g.hx), (n - s) / (2.0 * g.hy), (e - 2.0 * c + w) / (g.hx * g.hx),
                 (n - 2.0 * c + s) / (g.hy * g.hy), (ne - nw - se + sw) / (4.0 * g.hx * g.hy)};
}

double operator_value(const Stencil& d) {
  return (1.0 + d.zx * d.zx) * d.zyy - 2.0 * d.zx * d.zy * d.zxy + (1.0 + d.zy * d.zy) * d.zxx;
}

// Interior residual vector in unknown order, and its norms.
std::vector<double> interior_residual(const Grid2D& g, const std::vector<double>& z, double& max_abs, double& l2) {
  std::vector<double> r;
  r.reserve((g.nx - 2) * (g.ny - 2));
  max_abs = 0.0;
  l2 = 0.0;
  for (std::size_t i = 1; i + 1 < g.nx; ++i) {
    for (std::size_t j = 1; j + 1 < g.ny; ++j) {
      const double v = operator_value(central(g, z, i, j));
      r.push_back(v);
      max_abs = std::max(max_abs, std::isfinite(v) ? std::fabs(v) : std::numeric_limits<double>::infinity());
      l2 += v * v;
    }
  }
  l2 = std::sqrt(l2);
  return r;
}

}  // namespace

std::vector<double> minimal_surface_residual(const GraphSurface& z) {
  check_graph(z);
  std::vector<double> r(z.grid.size(), 0.0);
  for (std::size_t i = 1; i + 1 < z.grid.nx; ++i) {
    for (std::size_t j = 1; j + 1 < z.grid.ny; ++j) r[z.grid.index(i, j)] = operator_value(central(z.grid, z.z, i, j));
  }
  return r;
}

GraphSurface harmonic_interpolation(const GraphSurface& boundary) {
  check_graph(boundary);
  const Grid2D& g = boundary.grid;
  const std::size_t ni = g.nx - 2, nj = g.ny - 2;
  auto unknown = [&](std::size_t i, std::size_t j) { return (i - 1) * nj + (j - 1); };
  BandMatrix A(ni * nj, nj, nj);
  std::vector<double> rhs(ni * nj, 0.0);
  const double ax = 1.0 / (g.hx * g.hx), ay = 1.0 / (g.hy * g.hy);
  for (std::size_t i = 1; i + 1 < g.nx; ++i) {
    for (std::size_t j = 1; j + 1 < g.ny; ++j) {
      const std::size_t u = unknown(i, j);
      A.add(u, u, -2.0 * (ax + ay));
      const std::pair<std::size_t, std::size_t> nb[4] = {{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}};
      const double w[4] = {ax, ax, ay, ay};
      for (int q = 0; q < 4; ++q) {
        const auto [a, b] = nb[q];
        if (g.interior(a, b)) {
          A.add(u, unknown(a, b), w[q]);
        } else {
          rhs[u] -= w[q] * boundary.z[g.index(a, b)];
        }
      }
    }
  }
  const std::vector<double> sol = A.solve(rhs);
  GraphSurface out = boundary;
  for (std::size_t i = 1; i + 1 < g.nx; ++i) {
    for (std::size_t j = 1; j + 1 < g.ny; ++j) out.z[g.index(i, j)] = sol[unknown(i, j)];
  }
  return out;
}

PlateauResult solve_plateau(const GraphSurface& boundary, const PlateauOptions& options) {
  check_graph(boundary);
  if (!(options.tolerance > 0.0)) throw InvalidArgument("solve_plateau: tolerance must be positive");
  if (options.max_iter < 0) throw InvalidArgument("solve_plateau: max_iter must be non-negative");
  const Grid2D& g = boundary.grid;
  const std::size_t ni = g.nx - 2, nj = g.ny - 2;
  auto unknown = [&](std::size_t i, std::size_t j) { return (i - 1) * nj + (j - 1); };

  PlateauResult result;
  if (options.initial_guess) {
    if (options.initial_guess->size() != g.size()) throw InvalidArgument("initial guess does not match the grid");
    result.surface = boundary;
    for (std::size_t i = 1; i + 1 < g.nx; ++i) {
      for (std::size_t j = 1; j + 1 < g.ny; ++j) {
        result.surface.z[g.index(i, j)] = (*options.initial_guess)[g.index(i, j)];
      }
    }
  } else {
    result.surface = harmonic_interpolation(boundary);
  }
  std::vector<double>& z = result.surface.z;

  double max_abs = 0.0, l2 = 0.0;
  std::vector<double> F = interior_residual(g, z, max_abs, l2);
  result.log.emplace_back(0, max_abs);

  int iter = 0;
  while (!(max_abs < options.tolerance)) {
    if (iter >= options.max_iter) {
      throw NoConvergence("Plateau solver reached max_iter = " + std::to_string(options.max_iter) +
                              " with max residual " + format_number(max_abs),
                          static_cast<std::size_t>(iter), max_abs);
    }
    BandMatrix J(ni * nj, nj + 1, nj + 1);
    const double hx = g.hx, hy = g.hy;
    for (std::size_t i = 1; i + 1 < g.nx; ++i) {
      for (std::size_t j = 1; j + 1 < g.ny; ++j) {
        const Stencil d = central(g, z, i, j);
        const double A = 2.0 * d.zx * d.zyy - 2.0 * d.zy * d.zxy;
        const double B = 2.0 * d.zy * d.zxx - 2.0 * d.zx * d.zxy;
        const double P = 1.0 + d.zy * d.zy;
        const double Q = 1.0 + d.zx * d.zx;
        const double S = -2.0 * d.zx * d.zy / (4.0 * hx * hy);
        const struct {
          std::ptrdiff_t di, dj;
          double w;
        } taps[9] = {
            {0, 0, -2.0 * P / (hx * hx) - 2.0 * Q / (hy * hy)},
            {1, 0, A / (2.0 * hx) + P / (hx * hx)},
            {-1, 0, -A / (2.0 * hx) + P / (hx * hx)},
            {0, 1, B / (2.0 * hy) + Q / (hy * hy)},
            {0, -1, -B / (2.0 * hy) + Q / (hy * hy)},
            {1, 1, S},
            {-1, -1, S},
            {1, -1, -S},
            {-1, 1, -S},
        };
        const std::size_t u = unknown(i, j);
        for (const auto& t : taps) {
          const std::size_t a = i + t.di, b = j + t.dj;
          if (g.interior(a, b)) J.add(u, unknown(a, b), t.w);
        }
      }
    }
    std::vector<double> neg(F.size());
    for (std::size_t k = 0; k < F.size(); ++k) neg[k] = -F[k];
    const std::vector<double> delta = J.solve(std::move(neg));

    double lambda = 1.0;
    std::vector<double> trial = z;
    double t_max = 0.0, t_l2 = 0.0;
    std::vector<double> t_F;
    for (int halving = 0;; ++halving) {
      for (std::size_t i = 1; i + 1 < g.nx; ++i) {
        for (std::size_t j = 1; j + 1 < g.ny; ++j) {
          trial[g.index(i, j)] = z[g.index(i, j)] + lambda * delta[unknown(i, j)];
        }
      }
      t_F = interior_residual(g, trial, t_max, t_l2);
      if (t_l2 < l2 || halving == 10) break;
      lambda *= 0.5;
    }
    z.swap(trial);
    F.swap(t_F);
    max_abs = t_max;
    l2 = t_l2;
    ++iter;
    result.log.emplace_back(iter, max_abs);
  }
  result.iterations = iter;
  result.residual = max_abs;
  return result;
}

double consistency_check(const BivectorLagrangian& area, const GraphSurface& z) {
  check_graph(z);
  const ResidualField r = el_residual(area, z.embed());
  const std::vector<double> ms = minimal_surface_residual(z);
  std::vector<double> zx, zy;
  fd_gradient(z.grid, z.z, zx, zy);
  std::vector<double> dev(z.grid.size(), 0.0);
  for (std::size_t k = 0; k < dev.size(); ++k) {
    const double W = std::sqrt(1.0 + zx[k] * zx[k] + zy[k] * zy[k]);
    dev[k] = -W * W * W * r.r[2][k] - ms[k];
  }
  return max_interior(z.grid, dev);
}

double discrete_area(const GraphSurface& z) {
  check_graph(z);
  const Grid2D& g = z.grid;
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < g.nx; ++i) {
    for (std::size_t j = 0; j + 1 < g.ny; ++j) {
      const double a = z.z[g.index(i, j)], b = z.z[g.index(i + 1, j)];
      const double c = z.z[g.index(i, j + 1)], d = z.z[g.index(i + 1, j + 1)];
      const double zx = (b + d - a - c) / (2.0 * g.hx);
      const double zy = (c + d - a - b) / (2.0 * g.hy);
      area += std::sqrt(1.0 + zx * zx + zy * zy) * g.hx * g.hy;
    }
  }
  return area;
}

std::vector<double> discrete_area_gradient(const GraphSurface& z) {
  check_graph(z);
  const Grid2D& g = z.grid;
  std::vector<double> grad(g.size(), 0.0);
  for (std::size_t i = 0; i + 1 < g.nx; ++i) {
    for (std::size_t j = 0; j + 1 < g.ny; ++j) {
      const std::size_t ia = g.index(i, j), ib = g.index(i + 1, j), ic = g.index(i, j + 1), id = g.index(i + 1, j + 1);
      const double zx = (z.z[ib] + z.z[id] - z.z[ia] - z.z[ic]) / (2.0 * g.hx);
      const double zy = (z.z[ic] + z.z[id] - z.z[ia] - z.z[ib]) / (2.0 * g.hy);
      const double f = g.hx * g.hy / std::sqrt(1.0 + zx * zx + zy * zy);
      const double gx = f * zx / (2.0 * g.hx), gy = f * zy / (2.0 * g.hy);
      grad[ia] += -gx - gy;
      grad[ib] += gx - gy;
      grad[ic] += -gx + gy;
      grad[id] += gx + gy;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// IO

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const SurfaceGrid& S) {
  out << "t,s";
  for (int c = 1; c <= S.m; ++c) out << ",x" << c;
  out << '\n';
  for (std::size_t i = 0; i < S.grid.nx; ++i) {
    for (std::size_t j = 0; j < S.grid.ny; ++j) {
      out << csv_number(S.grid.x(i)) << ',' << csv_number(S.grid.y(j));
      for (int c = 0; c < S.m; ++c) out << ',' << csv_number(S.x[c][S.grid.index(i, j)]);
      out << '\n';
    }
  }
}

void write_csv(std::ostream& out, const GraphSurface& z) {
  SurfaceGrid S{1, z.grid, {z.z}};
  out << "t,s,x1\n";
  for (std::size_t i = 0; i < S.grid.nx; ++i) {
    for (std::size_t j = 0; j < S.grid.ny; ++j) {
      out << csv_number(S.grid.x(i)) << ',' << csv_number(S.grid.y(j)) << ',' << csv_number(z.z[z.grid.index(i, j)])
          << '\n';
    }
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double to_double(const std::string& cell, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size()) {
    throw InvalidArgument("CSV line " + std::to_string(line) + ": '" + cell + "' is not a number");
  }
  return v;
}

// Sorted distinct values checked for uniform spacing.
std::vector<double> axis(std::vector<double> values, const char* name) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (values.size() < 2) throw InvalidArgument(std::string("CSV has fewer than two distinct ") + name + " values");
  const double h = (values.back() - values.front()) / static_cast<double>(values.size() - 1);
  const double tol = 1e-12 * std::max(1.0, std::fabs(values.back() - values.front()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::fabs(values[i] - (values.front() + static_cast<double>(i) * h)) > tol) {
      throw InvalidArgument(std::string("CSV ") + name + " values are not uniformly spaced");
    }
  }
  return values;
}

}  // namespace

SurfaceGrid read_surface_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("CSV is empty");
  const auto header = split(line);
  if (header.size() < 3 || header[0] != "t" || header[1] != "s") {
    throw InvalidArgument("CSV header must be t,s,x1..xm");
  }
  const int m = static_cast<int>(header.size()) - 2;
  for (int c = 1; c <= m; ++c) {
    if (header[c + 1] != "x" + std::to_string(c)) throw InvalidArgument("CSV header must be t,s,x1..xm");
  }
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw InvalidArgument("CSV line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                            " fields, expected " + std::to_string(header.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(to_double(c, lineno));
    rows.push_back(std::move(row));
  }
  std::vector<double> ts, ss;
  for (const auto& r : rows) {
    ts.push_back(r[0]);
    ss.push_back(r[1]);
  }
  const auto tv = axis(ts, "t");
  const auto sv = axis(ss, "s");
  SurfaceGrid S;
  S.m = m;
  S.grid = Grid2D::span(tv.front(), tv.back(), tv.size(), sv.front(), sv.back(), sv.size());
  if (rows.size() != S.grid.size()) throw InvalidArgument("CSV rows do not form a full rectangular grid");
  S.x.assign(m, std::vector<double>(S.grid.size(), 0.0));
  std::vector<bool> seen(S.grid.size(), false);
  for (const auto& r : rows) {
    const auto i = static_cast<std::size_t>(std::lower_bound(tv.begin(), tv.end(), r[0]) - tv.begin());
    const auto j = static_cast<std::size_t>(std::lower_bound(sv.begin(), sv.end(), r[1]) - sv.begin());
    const std::size_t k = S.grid.index(i, j);
    if (seen[k]) throw InvalidArgument("CSV repeats a grid node");
    seen[k] = true;
    for (int c = 0; c < m; ++c) S.x[c][k] = r[c + 2];
  }
  S.validate();
  return S;
}

GraphSurface read_graph_csv(std::istream& in) {
  const SurfaceGrid S = read_surface_csv(in);
  if (S.m != 1) throw InvalidArgument("graph CSV must have the header t,s,x1");
  return GraphSurface{S.grid, S.x[0]};
}

std::string to_json(const SurfaceGrid& S) {
  nlohmann::json j;
  j["m"] = S.m;
  j["t0"] = S.grid.x0;
  j["dt"] = S.grid.hx;
  j["nt"] = S.grid.nx;
  j["s0"] = S.grid.y0;
  j["ds"] = S.grid.hy;
  j["ns"] = S.grid.ny;
  j["x"] = S.x;
  return j.dump();
}

SurfaceGrid surface_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SurfaceGrid S;
    S.m = j.at("m").get<int>();
    S.grid = Grid2D{j.at("nt").get<std::size_t>(), j.at("ns").get<std::size_t>(), j.at("t0").get<double>(),
                    j.at("dt").get<double>(),       j.at("s0").get<double>(),      j.at("ds").get<double>()};
    S.x = j.at("x").get<std::vector<std::vector<double>>>();
    S.validate();
    return S;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("surface JSON: ") + e.what());
  }
}

std::string to_json(const GraphSurface& z) {
  nlohmann::json j;
  j["x0"] = z.grid.x0;
  j["hx"] = z.grid.hx;
  j["nx"] = z.grid.nx;
  j["y0"] = z.grid.y0;
  j["hy"] = z.grid.hy;
  j["ny"] = z.grid.ny;
  j["z"] = z.z;
  return j.dump();
}

GraphSurface graph_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    GraphSurface g;
    g.grid = Grid2D{j.at("nx").get<std::size_t>(), j.at("ny").get<std::size_t>(), j.at("x0").get<double>(),
                    j.at("hx").get<double>(),       j.at("y0").get<double>(),      j.at("hy").get<double>()};
    g.z = j.at("z").get<std::vector<double>>();
    check_graph(g);
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("graph JSON: ") + e.what());
  }
}

void write_log_csv(std::ostream& out, const std::vector<std::pair<int, double>>& log) {
  out << "iteration,max_residual\n";
  for (const auto& [it, r] : log) out << it << ',' << csv_number(r) << '\n';
}

}  // namespace gradmech
