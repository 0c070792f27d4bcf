#pragma once

// Derived Euler-Lagrange systems: implicit residuals on a jet chart, and an
// optional explicit first-order form over a state that carries the momenta.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradmech/chart.hpp"
#include "gradmech/expr.hpp"
#include "gradmech/numerics.hpp"
#include "gradmech/program.hpp"

namespace gradmech {

/// d/dt state = rates, except on `solved` rows where hessian * rate = forcing.
struct ExplicitForm {
  std::vector<std::string> state;
  std::vector<Expr> rates;
  std::vector<std::size_t> solved;
  std::vector<std::vector<Expr>> hessian;
  std::vector<Expr> forcing;
  std::vector<Expr> from_jets;  // each state entry as a function on the jet chart
  std::vector<std::string> conserved_names;
  std::vector<Expr> conserved;  // functions of the state
};

/// d/dt variable = rate.
struct Constraint {
  std::string variable;
  Expr rate;
};

struct NamedExpr {
  std::string name;
  Expr value;
};

struct ELSystem {
  std::string kind;
  Chart chart;
  std::vector<std::string> residual_names;
  std::vector<Expr> residuals;  // the system is "every residual = 0"
  std::vector<Constraint> constraints;
  std::vector<NamedExpr> momenta;
  std::vector<std::size_t> el_rows;    // residual rows forming the Euler-Lagrange equations
  std::vector<std::string> top_jets;   // highest jet of each el_rows equation
  std::optional<ExplicitForm> explicit_form;
  bool regular = false;
  double hessian_condition = 0.0;  // largest finite condition number sampled
};

/// Compiled right-hand side of an ExplicitForm.
class ExplicitRhs {
 public:
  explicit ExplicitRhs(const ExplicitForm& form);

  std::size_t dimension() const { return dim_; }
  /// Throws SingularLegendre when the Hessian cannot be solved.
  void operator()(std::span<const double> state, std::span<double> rate) const;
  double hessian_condition(std::span<const double> state) const;
  std::vector<double> conserved(std::span<const double> state) const;

 private:
  std::size_t dim_;
  std::vector<std::size_t> solved_;
  std::vector<std::size_t> free_rows_;
  Program rates_;
  Program hessian_;  // n*n hessian entries then n forcing entries
  Program conserved_;
};

/// Ingredients of the first-order reduction shared by the algebroid and the
/// classical pipelines. With momenta P_1..P_k:
///   d/dt base   = base_rates
///   d/dt y_i    = fibre_factor[i] * y_{i+1}           (i < k)
///   d/dt P_1    = force
///   d/dt P_r+1  = (dL/dy_r - P_r) / gamma[r]          (r < k)
/// and d/dt y_k solves  H * d/dt y_k = d/dt P_k - (mixed second partials) * rates.
struct ReductionInput {
  Expr lagrangian;
  std::vector<std::string> base;
  std::vector<Expr> base_rates;
  std::vector<std::vector<std::string>> fibre;     // fibre[i-1][a] = y^a_i
  std::vector<double> fibre_factor;                // index i-1
  std::vector<double> gamma;                       // index r-1
  std::vector<std::vector<std::string>> momentum;  // state S^a_r with P^a_r = momentum_scale[r-1] * S^a_r
  std::vector<double> momentum_scale;              // empty means all ones
  std::vector<std::vector<Expr>> momentum_jets;    // P^a_r on the jet chart
  std::vector<Expr> force;                         // d/dt P^a_1, may reference the momentum state
};

ExplicitForm reduce_to_first_order(const ReductionInput& in);

/// Top-Hessian condition numbers at `samples` random points of the Hessian's
/// variables (uniform in [-1, 1]); +inf where evaluation fails.
std::vector<double> sample_hessian_conditions(const std::vector<std::vector<Expr>>& hessian, int samples,
                                              std::uint64_t seed);

/// Regularity threshold on the top-Hessian condition number.
inline constexpr double kRegularityLimit = 1e8;

}  // namespace gradmech
