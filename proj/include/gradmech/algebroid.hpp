#pragma once

// Lie algebroids in local coordinates: an anchor rho^A_a(x) and structure
// functions C^c_{ab}(x) over base coordinates x^1..x^m.

#include <cstdint>
#include <string>
#include <vector>

#include "gradmech/expr.hpp"

namespace gradmech {

using Tensor3 = std::vector<std::vector<std::vector<double>>>;  // t[c][a][b]

struct AlgebroidSpec {
  std::string name;
  int base_dim = 0;  // m; 0 for a Lie algebra
  int rank = 0;      // n
  std::vector<std::string> base_names;
  std::vector<std::vector<Expr>> anchor;                 // anchor[A][a] = rho^A_a
  std::vector<std::vector<std::vector<Expr>>> structure;  // structure[c][a][b] = C^c_{ab}

  const Expr& rho(int A, int a) const { return anchor.at(A).at(a); }
  const Expr& C(int c, int a, int b) const { return structure.at(c).at(a).at(b); }

  /// Constant structure functions read back as numbers (throws unless every
  /// entry is variable-free).
  Tensor3 structure_constants() const;
};

/// "x" for a one-dimensional base, otherwise "x1".."xm".
std::vector<std::string> base_coordinate_names(int m);

/// Builds a spec after checking shapes and that every expression depends
/// only on the base coordinates. Axioms are not checked.
AlgebroidSpec make_algebroid(std::string name, int base_dim, int rank, std::vector<std::vector<Expr>> anchor,
                             std::vector<std::vector<std::vector<Expr>>> structure);

AlgebroidSpec tangent_algebroid(int m);

/// Lie algebra with constants c[k][i][j] = c^k_{ij}. Throws InvalidArgument
/// when c^k_{ij} + c^k_{ji} exceeds 1e-12.
AlgebroidSpec lie_algebra(const Tensor3& constants);
/// Same data without the antisymmetry check, for inspecting broken inputs.
AlgebroidSpec lie_algebra_unchecked(const Tensor3& constants);

Tensor3 so3_constants();  // c^k_{ij} = epsilon_{ijk}
AlgebroidSpec so3();
AlgebroidSpec abelian(int n);

struct AxiomReport {
  double antisymmetry_max_violation = 0.0;
  double jacobi_max_violation = 0.0;
  double anchor_compat_max_violation = 0.0;
  std::vector<std::vector<double>> sample_points;

  bool passed(double tolerance) const {
    return antisymmetry_max_violation < tolerance && jacobi_max_violation < tolerance &&
           anchor_compat_max_violation < tolerance;
  }
};

struct AxiomOptions {
  int samples = 50;
  std::uint64_t seed = 7;
  double range = 1.0;  // base points uniform in [-range, range]^m
};

/// Numerical check of antisymmetry, the Jacobi identity
///   sum_cyclic(a,b,c) ( C^e_{ad} C^d_{bc} + rho^A_a d_A C^e_{bc} ) = 0
/// and anchor compatibility
///   rho^B_c d_B rho^A_d - rho^B_d d_B rho^A_c = rho^A_e C^e_{cd}
/// at random base points.
AxiomReport check_axioms(const AlgebroidSpec& spec, const AxiomOptions& options = {});

}  // namespace gradmech
