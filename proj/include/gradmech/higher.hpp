#pragma once

// k-th order mechanics on Lie algebroids and its classical and Lie-algebra
// specializations.

#include <cstdint>
#include <string>
#include <vector>

#include "gradmech/algebroid.hpp"
#include "gradmech/chart.hpp"
#include "gradmech/expr.hpp"
#include "gradmech/numerics.hpp"
#include "gradmech/system.hpp"

namespace gradmech {

/// "y_i" for rank one, otherwise "y{a}_{i}" (a from 1).
std::string fibre_name(int rank, int a, int i);
/// "pi{j}" for rank one, otherwise "pi{j}_{b}".
std::string momentum_name(int rank, int j, int b);
/// Classical jet "q_i" or "q{A}_i".
std::string classical_name(int components, int A, int i);
/// Ostrogradski state momentum "p_r" or "p{A}_r".
std::string classical_momentum_name(int components, int A, int r);

struct LagrangianSpec {
  AlgebroidSpec algebroid;
  int order = 1;
  Expr lagrangian;

  /// Validates the order and that L lives on (x; y_1..y_k).
  LagrangianSpec(AlgebroidSpec algebroid, int order, Expr lagrangian);

  /// Chart (x^A; y^a_1..y^a_depth) with d/dt x^A = rho^A_a y^a_1 and
  /// d/dt y_i = (i+1) y_{i+1}.
  Chart chart(int depth) const;
  Chart chart() const { return chart(order); }
};

struct MomentaSet {
  int order = 0;
  int rank = 0;
  Chart chart;                       // prolonged far enough for every momentum
  std::vector<std::vector<Expr>> pi;  // pi[j-1][b]

  const Expr& at(int j, int b) const { return pi.at(j - 1).at(b); }
};

/// r * pi^{k-r+1}_b = sum_{i=r..k} (-1)^(i-r) (r!/i!) d^(i-r)/dt^(i-r) dL/dy^b_i.
MomentaSet momenta(const LagrangianSpec& spec);

struct DeriveOptions {
  bool explicit_form = true;
  int hessian_samples = 20;
  std::uint64_t seed = 20240601;
};

/// Residuals R_a = rho^A_a dL/dx^A + y^b_1 C^c_{ba} pi^k_c - d/dt pi^k_a on the
/// chart of depth 2k. Throws SingularLegendre when the top Hessian is singular
/// at every sampled state.
ELSystem el_equations(const LagrangianSpec& spec, const DeriveOptions& options = {});

/// Residuals sum_i (-1)^i d^i/dt^i dL/dq^(i) on Chart::qjet("q", components, 2k).
ELSystem classical_el(int order, const Expr& L, int components = 1, const DeriveOptions& options = {});

struct OracleOptions {
  int samples = 200;
  std::uint64_t seed = 20240601;
};

/// Max |algebroid residual - classical residual| at random prolonged states
/// after x -> q_0, y_i -> q_i / i!. Requires a tangent algebroid.
double reduce_check(const LagrangianSpec& spec, const OracleOptions& options = {});

/// L rewritten on the classical chart: x^A -> q^A_0, y^a_i -> q^a_i / i!.
Expr to_classical(const LagrangianSpec& spec);

/// Explicit state for a jet (missing jets are zero); throws InvalidArgument
/// for names outside the chart.
std::vector<double> state_from_jets(const ELSystem& sys, const Bindings& jets);

/// Explicit state from named state values (missing entries are zero).
std::vector<double> state_from_values(const ELSystem& sys, const Bindings& values);

/// RK4 on the explicit form, logging the conserved quantities at every
/// sample. Throws SingularLegendre when the Hessian condition reaches the
/// regularity limit at the initial state or at any 100-step check.
Trajectory simulate(const ELSystem& sys, const std::vector<double>& initial_state, double T, double dt);

/// Max deviation between the explicit right-hand side and d/dt of the state
/// on random jets that solve the residual equations for their top jets.
double explicit_consistency(const ELSystem& sys, const OracleOptions& options = {});

/// Placement of the structure constants in (ad*_x mu)_a.
enum class AdStarConvention {
  kRight,  // C^c_{ba} x^b mu_c, the form produced by el_equations
  kLeft,   // C^c_{ab} x^b mu_c
};

/// Names of the g2 chart: x (weight 1), z (weight 2), then x_r for r >= 2.
std::string g2_name(int rank, int a, int order);
Chart g2_chart(int rank, int depth);

/// mu = dL/dx - d/dt dL/dz, residual (ad*_x mu)_a - d/dt mu_a, constraint
/// d/dt x = z. Requires a Lie algebra (m = 0).
ELSystem g2_pipeline(const Expr& L, const AlgebroidSpec& algebra,
                     AdStarConvention convention = AdStarConvention::kRight);

/// Max |g2 residual - el_equations residual| at random prolonged states under
/// L_y(y1, y2) = L(x = y1, z = 2 y2) and x^(r) = (r+1)! y_{r+1}.
double g2_consistency(const Expr& L, const AlgebroidSpec& algebra, AdStarConvention convention,
                      const OracleOptions& options = {});

/// For a second-order spec on a tangent algebroid whose residual in
/// component `a` (from 1) is affine in the second and fourth derivatives only.
struct BaseEquation {
  bool matches_form = false;   // residual = alpha q'' + beta q'''' exactly
  double base_coefficient = 0;  // c in x'' = c x''''
  double jet_coefficient = 0;   // c in d/dt y_1 = c d^2/dt^2 y_2
};
BaseEquation base_equation(const LagrangianSpec& spec, int component);

/// Least-squares fit of c in x'' = c x'''' from the discrete action gradient
/// of the classical Lagrangian along a smooth multi-frequency curve.
struct OracleFit {
  double coefficient = 0;
  double relative_residual = 0;
};
OracleFit oracle_base_coefficient(const LagrangianSpec& spec, int component, double dt = 2.5e-3,
                                  std::uint64_t seed = 20240601);

}  // namespace gradmech
