#include "gradmech/higher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "gradmech/errors.hpp"
#include "gradmech/program.hpp"

namespace gradmech {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

bool is_tangent(const AlgebroidSpec& a) {
  if (a.base_dim != a.rank) return false;
  for (int A = 0; A < a.base_dim; ++A) {
    for (int b = 0; b < a.rank; ++b) {
      if (!fold_constants(a.rho(A, b)).is_const(A == b ? 1.0 : 0.0)) return false;
    }
  }
  for (int c = 0; c < a.rank; ++c) {
    for (int x = 0; x < a.rank; ++x) {
      for (int y = 0; y < a.rank; ++y) {
        if (!fold_constants(a.C(c, x, y)).is_const(0.0)) return false;
      }
    }
  }
  return true;
}

// True when C^c_{ba} = -C^a_{bc} for constant structure functions, which makes
// sum_c (pi_c)^2 a Casimir of the coadjoint flow.
bool coadjoint_invariant_norm(const AlgebroidSpec& a) {
  if (a.base_dim != 0) return false;
  Tensor3 c;
  try {
    c = a.structure_constants();
  } catch (const InvalidArgument&) {
    return false;
  }
  for (int x = 0; x < a.rank; ++x) {
    for (int y = 0; y < a.rank; ++y) {
      for (int z = 0; z < a.rank; ++z) {
        if (std::fabs(c[x][y][z] + c[z][y][x]) > 1e-14) return false;
      }
    }
  }
  return true;
}

// P_r = r pi^{k-r+1}, built top-down: P_k = dL/dy_k, P_r = dL/dy_r - D P_{r+1} / (r+1).
std::vector<std::vector<Expr>> graded_momenta(const LagrangianSpec& spec, const Chart& chart) {
  const int k = spec.order;
  const int n = spec.algebroid.rank;
  std::vector<std::vector<Expr>> P(k, std::vector<Expr>(n));
  for (int a = 0; a < n; ++a) {
    P[k - 1][a] = diff(spec.lagrangian, fibre_name(n, a + 1, k));
    for (int r = k - 1; r >= 1; --r) {
      P[r - 1][a] = diff(spec.lagrangian, fibre_name(n, a + 1, r)) -
                    Expr(1.0 / (r + 1)) * total_derivative(P[r][a], chart);
    }
  }
  return P;
}

// rho^A_a dL/dx^A + y^b_1 C^c_{ba} P_c, with P given per component.
std::vector<Expr> algebroid_force(const LagrangianSpec& spec, const std::vector<Expr>& P) {
  const AlgebroidSpec& alg = spec.algebroid;
  const int n = alg.rank;
  std::vector<Expr> force;
  for (int a = 0; a < n; ++a) {
    Expr f(0.0);
    for (int A = 0; A < alg.base_dim; ++A) f = f + alg.rho(A, a) * diff(spec.lagrangian, alg.base_names[A]);
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < n; ++c) {
        const Expr& C = alg.C(c, b, a);
        if (C.is_const(0.0)) continue;
        f = f + Expr::var(fibre_name(n, b + 1, 1)) * C * P[c];
      }
    }
    force.push_back(f);
  }
  return force;
}

std::vector<Expr> algebroid_residuals(const LagrangianSpec& spec, const Chart& chart,
                                      const std::vector<std::vector<Expr>>& P) {
  const std::vector<Expr> force = algebroid_force(spec, P[0]);
  std::vector<Expr> out;
  for (int a = 0; a < spec.algebroid.rank; ++a) out.push_back(force[a] - total_derivative(P[0][a], chart));
  return out;
}

std::vector<Expr> classical_residuals(int k, const Expr& L, int components, const Chart& chart) {
  std::vector<Expr> out;
  for (int A = 1; A <= components; ++A) {
    Expr sum(0.0);
    for (int i = 0; i <= k; ++i) {
      const Expr term = total_derivative(diff(L, classical_name(components, A, i)), chart, i);
      sum = (i % 2 == 0) ? sum + term : sum - term;
    }
    out.push_back(sum);
  }
  return out;
}

// Uniform [-1, 1] draws for every chart coordinate; retries on domain errors.
template <typename Fn>
double max_over_samples(const std::vector<std::string>& slots, int samples, std::uint64_t seed, Fn&& deviation) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::vector<double> point(slots.size());
  double worst = 0.0;
  int done = 0;
  for (int attempt = 0; done < samples; ++attempt) {
    if (attempt >= samples * 20) throw EvalError("no admissible sample point found", "oracle");
    for (auto& v : point) v = coord(rng);
    double d = 0.0;
    try {
      d = deviation(point);
    } catch (const EvalError&) {
      continue;
    }
    worst = std::max(worst, std::isfinite(d) ? d : std::numeric_limits<double>::infinity());
    ++done;
  }
  return worst;
}

double smallest(const std::vector<double>& v) {
  double m = std::numeric_limits<double>::infinity();
  for (double x : v) m = std::min(m, x);
  return m;
}

}  // namespace

std::string fibre_name(int rank, int a, int i) {
  return rank == 1 ? "y_" + std::to_string(i) : "y" + std::to_string(a) + "_" + std::to_string(i);
}

std::string momentum_name(int rank, int j, int b) {
  return rank == 1 ? "pi" + std::to_string(j) : "pi" + std::to_string(j) + "_" + std::to_string(b);
}

std::string classical_name(int components, int A, int i) {
  return components == 1 ? "q_" + std::to_string(i) : "q" + std::to_string(A) + "_" + std::to_string(i);
}

std::string classical_momentum_name(int components, int A, int r) {
  return components == 1 ? "p_" + std::to_string(r) : "p" + std::to_string(A) + "_" + std::to_string(r);
}

LagrangianSpec::LagrangianSpec(AlgebroidSpec alg, int k, Expr L)
    : algebroid(std::move(alg)), order(k), lagrangian(std::move(L)) {
  if (order < 1) throw InvalidArgument("Lagrangian order must be at least 1");
  chart(order).validate(lagrangian);
}

Chart LagrangianSpec::chart(int depth) const {
  const int n = algebroid.rank;
  std::vector<JetVar> vars;
  for (int A = 0; A < algebroid.base_dim; ++A) vars.push_back(JetVar{algebroid.base_names[A], "x", A + 1, 0, 0});
  for (int a = 1; a <= n; ++a) {
    for (int i = 1; i <= depth; ++i) vars.push_back(JetVar{fibre_name(n, a, i), "y", a, i, i});
  }
  Chart c(std::move(vars), Prolongation::kYGraded);
  for (int A = 0; A < algebroid.base_dim; ++A) {
    Expr rate(0.0);
    for (int a = 0; a < n; ++a) rate = rate + algebroid.rho(A, a) * Expr::var(fibre_name(n, a + 1, 1));
    c.set_rate(algebroid.base_names[A], rate);
  }
  return c;
}

MomentaSet momenta(const LagrangianSpec& spec) {
  MomentaSet m;
  m.order = spec.order;
  m.rank = spec.algebroid.rank;
  m.chart = spec.chart(2 * spec.order - 1);
  const auto P = graded_momenta(spec, m.chart);
  m.pi.assign(spec.order, std::vector<Expr>(m.rank));
  for (int r = 1; r <= spec.order; ++r) {
    for (int b = 0; b < m.rank; ++b) m.pi[spec.order - r][b] = P[r - 1][b] * Expr(1.0 / r);
  }
  return m;
}

ELSystem el_equations(const LagrangianSpec& spec, const DeriveOptions& options) {
  const int k = spec.order;
  const AlgebroidSpec& alg = spec.algebroid;
  const int n = alg.rank;
  ELSystem sys;
  sys.kind = "algebroid";
  sys.chart = spec.chart(2 * k);
  const auto P = graded_momenta(spec, sys.chart);
  sys.residuals = algebroid_residuals(spec, sys.chart, P);
  for (int a = 1; a <= n; ++a) {
    sys.residual_names.push_back("euler_lagrange_" + std::to_string(a));
    sys.el_rows.push_back(static_cast<std::size_t>(a - 1));
    sys.top_jets.push_back(fibre_name(n, a, 2 * k));
  }
  for (const auto& v : sys.chart.vars()) {
    if (v.order < 2 * k || v.family == "x") sys.constraints.push_back(Constraint{v.name, sys.chart.rate(v)});
  }
  for (int j = 1; j <= k; ++j) {
    for (int b = 1; b <= n; ++b) {
      const int r = k - j + 1;
      sys.momenta.push_back(NamedExpr{momentum_name(n, j, b), P[r - 1][b - 1] * Expr(1.0 / r)});
    }
  }
  if (!options.explicit_form) return sys;

  ReductionInput in;
  in.lagrangian = spec.lagrangian;
  for (int A = 0; A < alg.base_dim; ++A) {
    in.base.push_back(alg.base_names[A]);
    in.base_rates.push_back(sys.chart.rate(sys.chart.at(alg.base_names[A])));
  }
  in.fibre.assign(k, {});
  in.momentum.assign(k, {});
  in.momentum_jets = P;
  for (int i = 1; i <= k; ++i) {
    for (int a = 1; a <= n; ++a) in.fibre[i - 1].push_back(fibre_name(n, a, i));
    in.fibre_factor.push_back(i + 1);
    in.gamma.push_back(1.0 / (i + 1));
    in.momentum_scale.push_back(i);
    for (int a = 1; a <= n; ++a) in.momentum[i - 1].push_back(momentum_name(n, k - i + 1, a));
  }
  std::vector<Expr> P1_state;
  for (int a = 1; a <= n; ++a) P1_state.push_back(Expr::var(momentum_name(n, k, a)));
  in.force = algebroid_force(spec, P1_state);
  ExplicitForm form = reduce_to_first_order(in);
  if (coadjoint_invariant_norm(alg)) {
    Expr casimir(0.0);
    for (const auto& v : P1_state) casimir = casimir + v * v;
    form.conserved_names.push_back("casimir");
    form.conserved.push_back(casimir);
  }

  sys.hessian_condition = smallest(sample_hessian_conditions(form.hessian, options.hessian_samples, options.seed));
  sys.regular = sys.hessian_condition < kRegularityLimit;
  if (!sys.regular) {
    throw SingularLegendre("top Hessian d2L/dy_k dy_k is singular (condition number >= 1e8 at every sampled state)");
  }
  sys.explicit_form = std::move(form);
  return sys;
}

ELSystem classical_el(int k, const Expr& L, int components, const DeriveOptions& options) {
  if (k < 1) throw InvalidArgument("classical_el: order must be at least 1");
  if (components < 1) throw InvalidArgument("classical_el: need at least one component");
  Chart::qjet("q", components, k).validate(L);
  ELSystem sys;
  sys.kind = "classical";
  sys.chart = Chart::qjet("q", components, 2 * k);
  sys.residuals = classical_residuals(k, L, components, sys.chart);
  for (int A = 1; A <= components; ++A) {
    sys.residual_names.push_back("euler_lagrange_" + std::to_string(A));
    sys.el_rows.push_back(static_cast<std::size_t>(A - 1));
    sys.top_jets.push_back(classical_name(components, A, 2 * k));
  }
  for (const auto& v : sys.chart.vars()) {
    if (v.order < 2 * k) sys.constraints.push_back(Constraint{v.name, sys.chart.rate(v)});
  }
  // Ostrogradski momenta p_r = sum_{i=r..k} (-D)^(i-r) dL/dq_i.
  std::vector<std::vector<Expr>> P(k, std::vector<Expr>(components));
  for (int A = 1; A <= components; ++A) {
    P[k - 1][A - 1] = diff(L, classical_name(components, A, k));
    for (int r = k - 1; r >= 1; --r) {
      P[r - 1][A - 1] = diff(L, classical_name(components, A, r)) - total_derivative(P[r][A - 1], sys.chart);
    }
  }
  for (int r = 1; r <= k; ++r) {
    for (int A = 1; A <= components; ++A) {
      sys.momenta.push_back(NamedExpr{classical_momentum_name(components, A, r), P[r - 1][A - 1]});
    }
  }
  if (!options.explicit_form) return sys;

  ReductionInput in;
  in.lagrangian = L;
  in.fibre.assign(k, {});
  in.momentum.assign(k, {});
  in.momentum_jets = P;
  for (int A = 1; A <= components; ++A) {
    in.base.push_back(classical_name(components, A, 0));
    in.base_rates.push_back(Expr::var(classical_name(components, A, 1)));
    in.force.push_back(diff(L, classical_name(components, A, 0)));
  }
  for (int i = 1; i <= k; ++i) {
    for (int A = 1; A <= components; ++A) {
      in.fibre[i - 1].push_back(classical_name(components, A, i));
      in.momentum[i - 1].push_back(classical_momentum_name(components, A, i));
    }
    in.fibre_factor.push_back(1.0);
    in.gamma.push_back(1.0);
  }
  ExplicitForm form = reduce_to_first_order(in);
  sys.hessian_condition = smallest(sample_hessian_conditions(form.hessian, options.hessian_samples, options.seed));
  sys.regular = sys.hessian_condition < kRegularityLimit;
  if (!sys.regular) {
    throw SingularLegendre("top Hessian d2L/dq_k dq_k is singular (condition number >= 1e8 at every sampled state)");
  }
  sys.explicit_form = std::move(form);
  return sys;
}

Expr to_classical(const LagrangianSpec& spec) {
  if (!is_tangent(spec.algebroid)) throw InvalidArgument("classical coordinates need a tangent algebroid");
  const int m = spec.algebroid.base_dim;
  std::map<std::string, Expr, std::less<>> sub;
  for (int A = 1; A <= m; ++A) {
    sub[spec.algebroid.base_names[A - 1]] = Expr::var(classical_name(m, A, 0));
    for (int i = 1; i <= spec.order; ++i) {
      sub[fibre_name(m, A, i)] = Expr::var(classical_name(m, A, i)) * Expr(1.0 / factorial(i));
    }
  }
  return substitute(spec.lagrangian, sub);
}

double reduce_check(const LagrangianSpec& spec, const OracleOptions& options) {
  const Expr Lq = to_classical(spec);
  const int m = spec.algebroid.base_dim;
  const int k = spec.order;
  const Chart ychart = spec.chart(2 * k);
  const Chart qchart = Chart::qjet("q", m, 2 * k);
  const auto R = algebroid_residuals(spec, ychart, graded_momenta(spec, ychart));
  const auto E = classical_residuals(k, Lq, m, qchart);

  // Slots: x^A then y^a_i; the classical point is q_0 = x, q_i = i! y_i.
  std::vector<std::string> yslots = spec.algebroid.base_names;
  std::vector<std::string> qslots;
  std::vector<double> qscale;
  for (int A = 1; A <= m; ++A) {
    for (int i = 1; i <= 2 * k; ++i) yslots.push_back(fibre_name(m, A, i));
  }
  for (int A = 1; A <= m; ++A) {
    qslots.push_back(classical_name(m, A, 0));
    qscale.push_back(1.0);
  }
  for (int A = 1; A <= m; ++A) {
    for (int i = 1; i <= 2 * k; ++i) {
      qslots.push_back(classical_name(m, A, i));
      qscale.push_back(factorial(i));
    }
  }
  const Program py(R, yslots);
  const Program pq(E, qslots);
  return max_over_samples(yslots, options.samples, options.seed, [&](const std::vector<double>& y) {
    std::vector<double> q(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) q[i] = qscale[i] * y[i];
    const auto r = py(y);
    const auto e = pq(q);
    double d = 0.0;
    for (std::size_t a = 0; a < r.size(); ++a) d = std::max(d, std::fabs(r[a] - e[a]));
    return d;
  });
}

std::vector<double> state_from_jets(const ELSystem& sys, const Bindings& jets) {
  if (!sys.explicit_form) throw InvalidArgument("system has no explicit form");
  const auto names = sys.chart.names();
  std::vector<double> point(names.size(), 0.0);
  for (const auto& [name, value] : jets) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InvalidArgument("'" + name + "' is not a jet coordinate of the system");
    point[static_cast<std::size_t>(it - names.begin())] = value;
  }
  return Program(sys.explicit_form->from_jets, names)(point);
}

std::vector<double> state_from_values(const ELSystem& sys, const Bindings& values) {
  if (!sys.explicit_form) throw InvalidArgument("system has no explicit form");
  const auto& names = sys.explicit_form->state;
  std::vector<double> state(names.size(), 0.0);
  for (const auto& [name, value] : values) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InvalidArgument("'" + name + "' is not a state variable of the system");
    state[static_cast<std::size_t>(it - names.begin())] = value;
  }
  return state;
}

Trajectory simulate(const ELSystem& sys, const std::vector<double>& initial_state, double T, double dt) {
  if (!sys.explicit_form) throw InvalidArgument("simulate: system has no explicit form");
  if (!(T > 0.0)) throw InvalidArgument("simulate: T must be positive");
  if (!(dt > 0.0)) throw InvalidArgument("simulate: dt must be positive");
  const ExplicitRhs rhs(*sys.explicit_form);
  if (initial_state.size() != rhs.dimension()) throw InvalidArgument("simulate: initial state has the wrong size");

  auto check_regular = [&](std::span<const double> y, double t) {
    const double cond = rhs.hessian_condition(y);
    if (!(cond < kRegularityLimit)) {
      throw SingularLegendre("top Hessian condition number " + format_number(cond) + " exceeds 1e8 at t = " +
                             format_number(t));
    }
  };
  check_regular(initial_state, 0.0);

  std::vector<std::vector<double>> conserved;
  OdeProblem problem{[&](double, std::span<const double> y, std::span<double> dy) { rhs(y, dy); }, initial_state, 0.0,
                     T, dt};
  Trajectory traj = rk4(problem, [&](std::size_t step, double t, std::span<const double> y) {
    if (step > 0 && step % 100 == 0) check_regular(y, t);
    conserved.push_back(rhs.conserved(y));
  });
  traj.state_names = sys.explicit_form->state;
  traj.conserved_names = sys.explicit_form->conserved_names;
  traj.conserved = std::move(conserved);
  return traj;
}

double explicit_consistency(const ELSystem& sys, const OracleOptions& options) {
  if (!sys.explicit_form) throw InvalidArgument("explicit_consistency: system has no explicit form");
  if (sys.el_rows.empty()) throw InvalidArgument("explicit_consistency: system has no jet equations");
  const ExplicitForm& form = *sys.explicit_form;
  const auto names = sys.chart.names();
  std::vector<std::size_t> top;
  for (const auto& t : sys.top_jets) {
    top.push_back(static_cast<std::size_t>(std::find(names.begin(), names.end(), t) - names.begin()));
  }
  std::vector<Expr> eqs;
  for (std::size_t r : sys.el_rows) eqs.push_back(sys.residuals[r]);
  std::vector<Expr> jac;
  for (const auto& e : eqs) {
    for (const auto& t : sys.top_jets) jac.push_back(diff(e, t));
  }
  eqs.insert(eqs.end(), jac.begin(), jac.end());
  const Program residual(eqs, names);
  std::vector<Expr> rates;
  for (const auto& e : form.from_jets) rates.push_back(total_derivative(e, sys.chart));
  const Program from_jets(form.from_jets, names);
  const Program state_rates(rates, names);
  const ExplicitRhs rhs(form);
  const std::size_t n = top.size();

  return max_over_samples(names, options.samples, options.seed, [&](std::vector<double> point) {
    for (std::size_t t : top) point[t] = 0.0;
    // The residuals are affine in the top jets; a few Newton steps settle roundoff.
    for (int iter = 0; iter < 4; ++iter) {
      const auto out = residual(point);
      Matrix J(n, std::vector<double>(n));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) J[i][j] = out[n + i * n + j];
      }
      std::vector<double> r(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n));
      std::vector<double> step;
      try {
        step = dense_solve(std::move(J), r);
      } catch (const SingularJacobian&) {
        throw EvalError("residual is not solvable for the top jets", "explicit_consistency");
      }
      for (std::size_t i = 0; i < n; ++i) point[top[i]] -= step[i];
    }
    const auto state = from_jets(point);
    const auto expected = state_rates(point);
    std::vector<double> got(state.size());
    try {
      rhs(state, got);
    } catch (const SingularLegendre&) {
      throw EvalError("singular Hessian at sample", "explicit_consistency");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) d = std::max(d, std::fabs(got[i] - expected[i]));
    return d;
  });
}

std::string g2_name(int rank, int a, int order) {
  const std::string comp = rank == 1 ? "" : std::to_string(a);
  if (order == 0) return "x" + comp;
  if (order == 1) return "z" + comp;
  return "x" + comp + "_" + std::to_string(order);
}

Chart g2_chart(int rank, int depth) {
  std::vector<JetVar> vars;
  for (int a = 1; a <= rank; ++a) {
    for (int r = 0; r <= depth; ++r) vars.push_back(JetVar{g2_name(rank, a, r), "x", a, r, r + 1});
  }
  return Chart(std::move(vars), Prolongation::kQJet);
}

namespace {

std::vector<Expr> g2_residuals(const Expr& L, const AlgebroidSpec& alg, AdStarConvention convention,
                               const Chart& chart, std::vector<Expr>* mu_out) {
  const int n = alg.rank;
  std::vector<Expr> mu;
  for (int a = 1; a <= n; ++a) {
    mu.push_back(diff(L, g2_name(n, a, 0)) - total_derivative(diff(L, g2_name(n, a, 1)), chart));
  }
  std::vector<Expr> out;
  for (int a = 0; a < n; ++a) {
    Expr ad(0.0);
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < n; ++c) {
        const Expr& C = convention == AdStarConvention::kRight ? alg.C(c, b, a) : alg.C(c, a, b);
        if (C.is_const(0.0)) continue;
        ad = ad + C * Expr::var(g2_name(n, b + 1, 0)) * mu[c];
      }
    }
    out.push_back(ad - total_derivative(mu[a], chart));
  }
  if (mu_out) *mu_out = mu;
  return out;
}

}  // namespace

ELSystem g2_pipeline(const Expr& L, const AlgebroidSpec& alg, AdStarConvention convention) {
  if (alg.base_dim != 0) throw InvalidArgument("g2_pipeline needs a Lie algebra (empty base)");
  const int n = alg.rank;
  g2_chart(n, 1).validate(L);
  ELSystem sys;
  sys.kind = "g2";
  sys.chart = g2_chart(n, 3);
  std::vector<Expr> mu;
  sys.residuals = g2_residuals(L, alg, convention, sys.chart, &mu);
  for (int a = 1; a <= n; ++a) {
    sys.residual_names.push_back("euler_lagrange_" + std::to_string(a));
    sys.el_rows.push_back(static_cast<std::size_t>(a - 1));
    sys.top_jets.push_back(g2_name(n, a, 3));
    sys.constraints.push_back(Constraint{g2_name(n, a, 0), Expr::var(g2_name(n, a, 1))});
    sys.momenta.push_back(NamedExpr{"mu" + (n == 1 ? std::string() : std::to_string(a)), mu[a - 1]});
  }
  std::vector<std::vector<Expr>> hessian(n, std::vector<Expr>(n));
  for (int a = 1; a <= n; ++a) {
    for (int b = 1; b <= n; ++b) hessian[a - 1][b - 1] = diff(diff(L, g2_name(n, a, 1)), g2_name(n, b, 1));
  }
  sys.hessian_condition = smallest(sample_hessian_conditions(hessian, 20, 20240601));
  sys.regular = sys.hessian_condition < kRegularityLimit;
  return sys;
}

double g2_consistency(const Expr& L, const AlgebroidSpec& alg, AdStarConvention convention,
                      const OracleOptions& options) {
  if (alg.base_dim != 0) throw InvalidArgument("g2_consistency needs a Lie algebra (empty base)");
  const int n = alg.rank;
  std::map<std::string, Expr, std::less<>> sub;
  for (int a = 1; a <= n; ++a) {
    sub[g2_name(n, a, 0)] = Expr::var(fibre_name(n, a, 1));
    sub[g2_name(n, a, 1)] = Expr(2.0) * Expr::var(fibre_name(n, a, 2));
  }
  const LagrangianSpec spec(alg, 2, substitute(L, sub));
  const Chart ychart = spec.chart(4);
  const auto R = algebroid_residuals(spec, ychart, graded_momenta(spec, ychart));
  const Chart gchart = g2_chart(n, 3);
  const auto G = g2_residuals(L, alg, convention, gchart, nullptr);

  std::vector<std::string> yslots, gslots;
  std::vector<double> scale;
  for (int a = 1; a <= n; ++a) {
    for (int i = 1; i <= 4; ++i) {
      yslots.push_back(fibre_name(n, a, i));
      gslots.push_back(g2_name(n, a, i - 1));
      scale.push_back(factorial(i));  // x^(r) = (r+1)! y_{r+1}
    }
  }
  const Program py(R, yslots);
  const Program pg(G, gslots);
  return max_over_samples(yslots, options.samples, options.seed, [&](const std::vector<double>& y) {
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = scale[i] * y[i];
    const auto r = py(y);
    const auto e = pg(g);
    double d = 0.0;
    for (std::size_t a = 0; a < r.size(); ++a) d = std::max(d, std::fabs(r[a] - e[a]));
    return d;
  });
}

BaseEquation base_equation(const LagrangianSpec& spec, int component) {
  if (spec.order != 2) throw InvalidArgument("base_equation: needs a second-order Lagrangian");
  const Expr Lq = to_classical(spec);  // validates the tangent algebroid
  const int m = spec.algebroid.base_dim;
  if (component < 1 || component > m) throw InvalidArgument("base_equation: component out of range");
  const Chart ychart = spec.chart(4);
  const Expr R = algebroid_residuals(spec, ychart, graded_momenta(spec, ychart))[component - 1];

  std::map<std::string, Expr, std::less<>> sub;
  for (int A = 1; A <= m; ++A) {
    sub[spec.algebroid.base_names[A - 1]] = Expr::var(classical_name(m, A, 0));
    for (int i = 1; i <= 4; ++i) {
      sub[fibre_name(m, A, i)] = Expr::var(classical_name(m, A, i)) * Expr(1.0 / factorial(i));
    }
  }
  const Expr E = substitute(R, sub);
  const std::string q2 = classical_name(m, component, 2);
  const std::string q4 = classical_name(m, component, 4);
  const Expr alpha = fold_constants(diff(E, q2));
  const Expr beta = fold_constants(diff(E, q4));
  const Expr ay = fold_constants(diff(R, fibre_name(m, component, 2)));
  const Expr by = fold_constants(diff(R, fibre_name(m, component, 4)));

  BaseEquation out;
  if (!alpha.is_const() || !beta.is_const() || !ay.is_const() || !by.is_const() || alpha.value() == 0.0 ||
      ay.value() == 0.0) {
    return out;
  }
  out.base_coefficient = -beta.value() / alpha.value();
  // d/dt y_1 = 2 y_2 and d^2/dt^2 y_2 = 12 y_4.
  out.jet_coefficient = -(by.value() / 12.0) / (ay.value() / 2.0);

  const Expr rest = E - Expr(alpha.value()) * Expr::var(q2) - Expr(beta.value()) * Expr::var(q4);
  const auto vars = free_variables(rest);
  const std::vector<std::string> slots(vars.begin(), vars.end());
  const Program p({rest}, slots);
  const double worst = max_over_samples(slots, 50, 20240601, [&](const std::vector<double>& x) {
    return std::fabs(p(x)[0]);
  });
  out.matches_form = worst <= 1e-12;
  return out;
}

OracleFit oracle_base_coefficient(const LagrangianSpec& spec, int component, double dt, std::uint64_t seed) {
  const Expr Lq = to_classical(spec);
  if (spec.order != 2) throw InvalidArgument("oracle_base_coefficient: needs a second-order Lagrangian");
  const int m = spec.algebroid.base_dim;
  if (component < 1 || component > m) throw InvalidArgument("oracle_base_coefficient: component out of range");
  const double T = 2.0;
  const auto samples = static_cast<std::size_t>(std::llround(T / dt)) + 1;
  const ActionDiscretization action(Lq, 2, m, 0.0, dt, samples);

  struct Mode {
    double amp, omega, phase;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.5, 1.0), omega(3.0, 5.0), phase(0.0, 2.0 * std::numbers::pi);
  std::vector<std::vector<Mode>> modes(m);
  for (auto& comp : modes) {
    for (int j = 0; j < 3; ++j) comp.push_back(Mode{amp(rng), omega(rng), phase(rng)});
  }
  auto derivative = [&](int A, int order, double t) {
    double v = 0.0;
    for (const auto& md : modes[A]) {
      // d^order/dt^order sin(w t + f) = w^order sin(w t + f + order pi / 2)
      v += md.amp * std::pow(md.omega, order) * std::sin(md.omega * t + md.phase + order * std::numbers::pi / 2);
    }
    return v;
  };
  std::vector<std::vector<double>> curve(samples, std::vector<double>(m));
  for (std::size_t s = 0; s < samples; ++s) {
    for (int A = 0; A < m; ++A) curve[s][A] = derivative(A, 0, action.time(s));
  }
  const auto grad = action.gradient(curve);

  // Least squares g = alpha q'' + beta q''''.
  double s22 = 0, s24 = 0, s44 = 0, g2 = 0, g4 = 0, gg = 0;
  const int a = component - 1;
  for (std::size_t s = action.first_consistent(); s <= action.last_consistent(); ++s) {
    const double g = grad[s][a] / dt;
    const double d2 = derivative(a, 2, action.time(s));
    const double d4 = derivative(a, 4, action.time(s));
    s22 += d2 * d2;
    s24 += d2 * d4;
    s44 += d4 * d4;
    g2 += g * d2;
    g4 += g * d4;
    gg += g * g;
  }
  const std::vector<double> ab = dense_solve({{s22, s24}, {s24, s44}}, {g2, g4});
  OracleFit fit;
  fit.coefficient = -ab[1] / ab[0];
  double rr = 0.0;
  for (std::size_t s = action.first_consistent(); s <= action.last_consistent(); ++s) {
    const double g = grad[s][a] / dt;
    const double r = g - ab[0] * derivative(a, 2, action.time(s)) - ab[1] * derivative(a, 4, action.time(s));
    rr += r * r;
  }
  fit.relative_residual = gg > 0 ? std::sqrt(rr / gg) : 0.0;
  return fit;
}

}  // namespace gradmech
