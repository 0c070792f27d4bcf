#include "gradmech/algebroid.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "gradmech/errors.hpp"
#include "gradmech/program.hpp"

namespace gradmech {

std::vector<std::string> base_coordinate_names(int m) {
  std::vector<std::string> names;
  if (m == 1) return {"x"};
  for (int A = 1; A <= m; ++A) names.push_back("x" + std::to_string(A));
  return names;
}

Tensor3 AlgebroidSpec::structure_constants() const {
  Tensor3 out(rank, std::vector<std::vector<double>>(rank, std::vector<double>(rank, 0.0)));
  for (int c = 0; c < rank; ++c) {
    for (int a = 0; a < rank; ++a) {
      for (int b = 0; b < rank; ++b) {
        const Expr e = fold_constants(C(c, a, b));
        if (!e.is_const()) throw InvalidArgument("structure function C is not constant");
        out[c][a][b] = e.value();
      }
    }
  }
  return out;
}

AlgebroidSpec make_algebroid(std::string name, int base_dim, int rank, std::vector<std::vector<Expr>> anchor,
                             std::vector<std::vector<std::vector<Expr>>> structure) {
  if (base_dim < 0 || rank < 1) throw InvalidArgument("algebroid needs base_dim >= 0 and rank >= 1");
  if (anchor.size() != static_cast<std::size_t>(base_dim)) throw InvalidArgument("anchor must have base_dim rows");
  for (const auto& row : anchor) {
    if (row.size() != static_cast<std::size_t>(rank)) throw InvalidArgument("anchor rows must have rank entries");
  }
  if (structure.size() != static_cast<std::size_t>(rank)) throw InvalidArgument("structure must be rank^3");
  for (const auto& plane : structure) {
    if (plane.size() != static_cast<std::size_t>(rank)) throw InvalidArgument("structure must be rank^3");
    for (const auto& row : plane) {
      if (row.size() != static_cast<std::size_t>(rank)) throw InvalidArgument("structure must be rank^3");
    }
  }
  AlgebroidSpec spec{std::move(name), base_dim, rank, base_coordinate_names(base_dim), std::move(anchor),
                     std::move(structure)};
  auto check = [&](const Expr& e, const char* what) {
    for (const auto& v : free_variables(e)) {
      bool known = false;
      for (const auto& b : spec.base_names) known = known || b == v;
      if (!known) throw InvalidArgument(std::string(what) + " depends on '" + v + "', which is not a base coordinate");
    }
  };
  for (const auto& row : spec.anchor) {
    for (const auto& e : row) check(e, "anchor");
  }
  for (const auto& plane : spec.structure) {
    for (const auto& row : plane) {
      for (const auto& e : row) check(e, "structure function");
    }
  }
  return spec;
}

AlgebroidSpec tangent_algebroid(int m) {
  if (m < 1) throw InvalidArgument("tangent_algebroid: m must be at least 1");
  std::vector<std::vector<Expr>> anchor(m, std::vector<Expr>(m, Expr(0.0)));
  for (int A = 0; A < m; ++A) anchor[A][A] = Expr(1.0);
  std::vector<std::vector<std::vector<Expr>>> structure(
      m, std::vector<std::vector<Expr>>(m, std::vector<Expr>(m, Expr(0.0))));
  return make_algebroid("tangent", m, m, std::move(anchor), std::move(structure));
}

AlgebroidSpec lie_algebra_unchecked(const Tensor3& constants) {
  const int n = static_cast<int>(constants.size());
  std::vector<std::vector<std::vector<Expr>>> structure(n);
  for (int c = 0; c < n; ++c) {
    if (constants[c].size() != static_cast<std::size_t>(n)) throw InvalidArgument("structure constants must be n^3");
    for (int a = 0; a < n; ++a) {
      if (constants[c][a].size() != static_cast<std::size_t>(n)) {
        throw InvalidArgument("structure constants must be n^3");
      }
      std::vector<Expr> row;
      for (int b = 0; b < n; ++b) row.emplace_back(constants[c][a][b]);
      structure[c].push_back(std::move(row));
    }
  }
  return make_algebroid("lie_algebra", 0, n, {}, std::move(structure));
}

AlgebroidSpec lie_algebra(const Tensor3& constants) {
  AlgebroidSpec spec = lie_algebra_unchecked(constants);
  const int n = spec.rank;
  for (int c = 0; c < n; ++c) {
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (std::fabs(constants[c][a][b] + constants[c][b][a]) > 1e-12) {
          throw InvalidArgument("structure constants are not antisymmetric: c^" + std::to_string(c + 1) + "_{" +
                                std::to_string(a + 1) + std::to_string(b + 1) + "} = " +
                                format_number(constants[c][a][b]) + ", c^" + std::to_string(c + 1) + "_{" +
                                std::to_string(b + 1) + std::to_string(a + 1) + "} = " +
                                format_number(constants[c][b][a]));
        }
      }
    }
  }
  return spec;
}

Tensor3 so3_constants() {
  Tensor3 c(3, std::vector<std::vector<double>>(3, std::vector<double>(3, 0.0)));
  c[2][0][1] = 1.0;
  c[2][1][0] = -1.0;
  c[0][1][2] = 1.0;
  c[0][2][1] = -1.0;
  c[1][2][0] = 1.0;
  c[1][0][2] = -1.0;
  return c;
}

AlgebroidSpec so3() {
  AlgebroidSpec spec = lie_algebra(so3_constants());
  spec.name = "so3";
  return spec;
}

AlgebroidSpec abelian(int n) {
  if (n < 1) throw InvalidArgument("abelian: rank must be at least 1");
  AlgebroidSpec spec = lie_algebra(Tensor3(n, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0))));
  spec.name = "abelian";
  return spec;
}

AxiomReport check_axioms(const AlgebroidSpec& spec, const AxiomOptions& options) {
  if (options.samples < 1) throw InvalidArgument("check_axioms: samples must be positive");
  const int m = spec.base_dim;
  const int n = spec.rank;

  // rho^A_a d_A f
  auto along = [&](int a, const Expr& f) {
    Expr sum(0.0);
    for (int A = 0; A < m; ++A) sum = sum + spec.rho(A, a) * diff(f, spec.base_names[A]);
    return sum;
  };

  std::vector<Expr> antisym, jacobi, compat;
  for (int c = 0; c < n; ++c) {
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) antisym.push_back(spec.C(c, a, b) + spec.C(c, b, a));
    }
  }
  for (int e = 0; e < n; ++e) {
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        for (int c = 0; c < n; ++c) {
          Expr sum(0.0);
          const int cyc[3][3] = {{a, b, c}, {b, c, a}, {c, a, b}};
          for (const auto& t : cyc) {
            for (int d = 0; d < n; ++d) sum = sum + spec.C(e, t[0], d) * spec.C(d, t[1], t[2]);
            sum = sum + along(t[0], spec.C(e, t[1], t[2]));
          }
          jacobi.push_back(sum);
        }
      }
    }
  }
  for (int A = 0; A < m; ++A) {
    for (int c = 0; c < n; ++c) {
      for (int d = 0; d < n; ++d) {
        Expr rhs(0.0);
        for (int e = 0; e < n; ++e) rhs = rhs + spec.rho(A, e) * spec.C(e, c, d);
        compat.push_back(along(c, spec.rho(A, d)) - along(d, spec.rho(A, c)) - rhs);
      }
    }
  }

  std::vector<Expr> all = antisym;
  all.insert(all.end(), jacobi.begin(), jacobi.end());
  all.insert(all.end(), compat.begin(), compat.end());
  const Program program(all, spec.base_names);

  AxiomReport report;
  auto bump = [](double& worst, double v) {
    worst = std::max(worst, std::isfinite(v) ? std::fabs(v) : std::numeric_limits<double>::infinity());
  };
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> coord(-options.range, options.range);
  std::vector<double> out(all.size());
  for (int s = 0; s < options.samples; ++s) {
    std::vector<double> point(static_cast<std::size_t>(m));
    for (auto& v : point) v = coord(rng);
    program.run(point, out);
    std::size_t k = 0;
    for (std::size_t i = 0; i < antisym.size(); ++i, ++k) {
      bump(report.antisymmetry_max_violation, out[k]);
    }
    for (std::size_t i = 0; i < jacobi.size(); ++i, ++k) {
      bump(report.jacobi_max_violation, out[k]);
    }
    for (std::size_t i = 0; i < compat.size(); ++i, ++k) {
      bump(report.anchor_compat_max_violation, out[k]);
    }
    report.sample_points.push_back(std::move(point));
  }
  return report;
}

}  // namespace gradmech
