#include "gradmech/tulczyjew.hpp"

#include <algorithm>
#include <cmath>

#include "gradmech/errors.hpp"

namespace gradmech {

namespace {

void check_sizes(std::size_t m, std::initializer_list<const std::vector<double>*> parts) {
  for (const auto* v : parts) {
    if (v->size() != m) throw InvalidArgument("phase-space point has inconsistent dimensions");
  }
}

std::vector<std::string> indexed(const std::string& stem, int m) {
  if (m == 1) return {stem};
  std::vector<std::string> out;
  for (int A = 1; A <= m; ++A) out.push_back(stem + std::to_string(A));
  return out;
}

void require_variables(const Expr& e, const std::vector<std::vector<std::string>>& allowed, const char* what) {
  for (const auto& v : free_variables(e)) {
    bool ok = false;
    for (const auto& group : allowed) ok = ok || std::find(group.begin(), group.end(), v) != group.end();
    if (!ok) throw ChartError(std::string(what) + " depends on '" + v + "', which is not a chart coordinate");
  }
}

}  // namespace

AlphaImage alpha(const DoublePoint& d) {
  check_sizes(d.x.size(), {&d.p, &d.xdot, &d.pdot});
  return AlphaImage{d.x, d.xdot, d.pdot, d.p};
}

DoublePoint alpha_inverse(const AlphaImage& a) {
  check_sizes(a.x.size(), {&a.xdot, &a.pdot, &a.p});
  return DoublePoint{a.x, a.p, a.xdot, a.pdot};
}

Matrix alpha_matrix(int m) {
  if (m < 1) throw InvalidArgument("alpha_matrix: m must be positive");
  const std::size_t n = static_cast<std::size_t>(m);
  Matrix a(4 * n, std::vector<double>(4 * n, 0.0));
  // Output blocks (x, xdot, pdot, p) read input blocks (x, p, xdot, pdot) = (0, 1, 2, 3).
  const std::size_t source[4] = {0, 2, 3, 1};
  for (std::size_t block = 0; block < 4; ++block) {
    for (std::size_t i = 0; i < n; ++i) a[block * n + i][source[block] * n + i] = 1.0;
  }
  return a;
}

FirstOrderNames first_order_names(int m) {
  if (m < 1) throw InvalidArgument("first-order chart needs m >= 1");
  return FirstOrderNames{indexed("x", m), indexed("xdot", m), indexed("xddot", m), indexed("p", m),
                         indexed("pdot", m)};
}

Chart first_order_chart(int m) {
  const FirstOrderNames n = first_order_names(m);
  std::vector<JetVar> vars;
  for (int A = 0; A < m; ++A) {
    vars.push_back(JetVar{n.x[A], "x", A + 1, 0, 0});
    vars.push_back(JetVar{n.xdot[A], "x", A + 1, 1, 1});
    vars.push_back(JetVar{n.xddot[A], "x", A + 1, 2, 2});
  }
  for (int A = 0; A < m; ++A) {
    vars.push_back(JetVar{n.p[A], "p", A + 1, 0, 1});
    vars.push_back(JetVar{n.pdot[A], "p", A + 1, 1, 2});
  }
  return Chart(std::move(vars), Prolongation::kQJet);
}

ELSystem lagrangian_dynamics(const Expr& L, int m) {
  const FirstOrderNames n = first_order_names(m);
  require_variables(L, {n.x, n.xdot}, "Lagrangian");
  ELSystem sys;
  sys.kind = "first_order_lagrangian";
  sys.chart = first_order_chart(m);

  std::vector<Expr> dldv, dldx;
  for (int A = 0; A < m; ++A) {
    dldv.push_back(diff(L, n.xdot[A]));
    dldx.push_back(diff(L, n.x[A]));
  }
  for (int A = 0; A < m; ++A) {
    sys.residual_names.push_back("euler_lagrange_" + n.x[A]);
    sys.residuals.push_back(dldx[A] - total_derivative(dldv[A], sys.chart));
    sys.el_rows.push_back(static_cast<std::size_t>(A));
    sys.top_jets.push_back(n.xddot[A]);
  }
  for (int A = 0; A < m; ++A) {
    sys.residual_names.push_back("legendre_" + n.p[A]);
    sys.residuals.push_back(Expr::var(n.p[A]) - dldv[A]);
  }
  for (int A = 0; A < m; ++A) {
    sys.residual_names.push_back("force_" + n.pdot[A]);
    sys.residuals.push_back(Expr::var(n.pdot[A]) - dldx[A]);
  }
  for (int A = 0; A < m; ++A) {
    sys.constraints.push_back(Constraint{n.x[A], Expr::var(n.xdot[A])});
    sys.constraints.push_back(Constraint{n.xdot[A], Expr::var(n.xddot[A])});
    sys.momenta.push_back(NamedExpr{n.p[A], dldv[A]});
  }

  ReductionInput in;
  in.lagrangian = L;
  in.base = n.x;
  for (const auto& v : n.xdot) in.base_rates.push_back(Expr::var(v));
  in.fibre = {n.xdot};
  in.momentum = {n.p};
  in.momentum_jets = {dldv};
  in.force = dldx;
  ExplicitForm form = reduce_to_first_order(in);

  const auto conds = sample_hessian_conditions(form.hessian, 20, 11);
  double best = std::numeric_limits<double>::infinity();
  for (double c : conds) best = std::min(best, c);
  sys.hessian_condition = best;
  sys.regular = best < kRegularityLimit;
  if (sys.regular) sys.explicit_form = std::move(form);
  return sys;
}

ELSystem hamiltonian_dynamics(const Expr& H, int m) {
  const FirstOrderNames n = first_order_names(m);
  require_variables(H, {n.x, n.p}, "Hamiltonian");
  ELSystem sys;
  sys.kind = "hamiltonian";
  sys.chart = first_order_chart(m);
  ExplicitForm form;
  for (int A = 0; A < m; ++A) {
    const Expr dhdp = diff(H, n.p[A]);
    sys.residual_names.push_back("velocity_" + n.xdot[A]);
    sys.residuals.push_back(Expr::var(n.xdot[A]) - dhdp);
    form.state.push_back(n.x[A]);
    form.rates.push_back(dhdp);
    form.from_jets.push_back(Expr::var(n.x[A]));
    sys.constraints.push_back(Constraint{n.x[A], dhdp});
  }
  for (int A = 0; A < m; ++A) {
    const Expr force = -diff(H, n.x[A]);
    sys.residual_names.push_back("force_" + n.pdot[A]);
    sys.residuals.push_back(Expr::var(n.pdot[A]) - force);
    form.state.push_back(n.p[A]);
    form.rates.push_back(force);
    form.from_jets.push_back(Expr::var(n.p[A]));
    sys.constraints.push_back(Constraint{n.p[A], force});
  }
  form.conserved_names.push_back("hamiltonian");
  form.conserved.push_back(H);
  sys.regular = true;
  sys.hessian_condition = 1.0;
  sys.explicit_form = std::move(form);
  return sys;
}

LegendreHamiltonianField::LegendreHamiltonianField(const Expr& L, int m) : m_(m) {
  const FirstOrderNames n = first_order_names(m);
  require_variables(L, {n.x, n.xdot}, "Lagrangian");
  std::vector<std::string> slots = n.x;
  slots.insert(slots.end(), n.xdot.begin(), n.xdot.end());
  std::vector<Expr> mom, force;
  std::vector<Expr> jac;
  for (int A = 0; A < m; ++A) {
    const Expr d = diff(L, n.xdot[A]);
    mom.push_back(d);
    for (int B = 0; B < m; ++B) jac.push_back(diff(d, n.xdot[B]));
    force.push_back(diff(L, n.x[A]));
  }
  mom.insert(mom.end(), jac.begin(), jac.end());
  momentum_ = Program(mom, slots);
  force_ = Program(force, slots);
  value_ = Program({L}, slots);
}

std::vector<double> LegendreHamiltonianField::velocity(std::span<const double> x, std::span<const double> p,
                                                       std::vector<double> v) const {
  const std::size_t m = static_cast<std::size_t>(m_);
  std::vector<double> slots(2 * m);
  std::copy(x.begin(), x.end(), slots.begin());
  double scale = 1.0;
  for (double pi : p) scale = std::max(scale, std::fabs(pi));
  double residual = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    std::copy(v.begin(), v.end(), slots.begin() + static_cast<std::ptrdiff_t>(m));
    const std::vector<double> out = momentum_(slots);
    std::vector<double> g(m);
    residual = 0.0;
    for (std::size_t A = 0; A < m; ++A) {
      g[A] = out[A] - p[A];
      residual = std::max(residual, std::fabs(g[A]));
    }
    if (residual <= 1e-14 * scale) return v;
    Matrix h(m, std::vector<double>(m));
    for (std::size_t A = 0; A < m; ++A) {
      for (std::size_t B = 0; B < m; ++B) h[A][B] = out[m + A * m + B];
    }
    std::vector<double> step;
    try {
      step = dense_solve(std::move(h), g);
    } catch (const SingularJacobian& e) {
      throw SingularLegendre(std::string("Legendre map is not invertible: ") + e.what());
    }
    for (std::size_t A = 0; A < m; ++A) v[A] -= step[A];
  }
  if (residual <= 1e-10 * scale) return v;
  throw NoConvergence("Legendre inversion did not converge", 50, residual);
}

void LegendreHamiltonianField::operator()(std::span<const double> xp, std::span<double> rate) const {
  const std::size_t m = static_cast<std::size_t>(m_);
  const auto x = xp.subspan(0, m);
  const auto p = xp.subspan(m, m);
  const std::vector<double> v = velocity(x, p, std::vector<double>(p.begin(), p.end()));
  std::vector<double> slots(x.begin(), x.end());
  slots.insert(slots.end(), v.begin(), v.end());
  const std::vector<double> f = force_(slots);
  for (std::size_t A = 0; A < m; ++A) {
    rate[A] = v[A];
    rate[m + A] = f[A];
  }
}

double LegendreHamiltonianField::hamiltonian(std::span<const double> xp) const {
  const std::size_t m = static_cast<std::size_t>(m_);
  const auto x = xp.subspan(0, m);
  const auto p = xp.subspan(m, m);
  const std::vector<double> v = velocity(x, p, std::vector<double>(p.begin(), p.end()));
  std::vector<double> slots(x.begin(), x.end());
  slots.insert(slots.end(), v.begin(), v.end());
  double h = -value_(slots)[0];
  for (std::size_t A = 0; A < m; ++A) h += p[A] * v[A];
  return h;
}

}  // namespace gradmech
