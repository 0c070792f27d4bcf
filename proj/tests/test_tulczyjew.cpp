#include <doctest.h>

#include <cmath>

#include "gradmech/errors.hpp"
#include "gradmech/higher.hpp"
#include "gradmech/tulczyjew.hpp"
#include "support.hpp"

using namespace gradmech;
using testing::Gen;

namespace {

double residual_at(const ELSystem& sys, const std::string& name, const Bindings& at) {
  for (std::size_t i = 0; i < sys.residuals.size(); ++i) {
    if (sys.residual_names[i] == name) return eval(sys.residuals[i], at);
  }
  FAIL("no residual named " << name);
  return 0.0;
}

// Max state divergence between the Lagrangian explicit form and the
// Hamiltonian field of the numerical Legendre transform.
double legendre_divergence(const Expr& L, int m, const std::vector<double>& x0, const std::vector<double>& v0) {
  const ELSystem lag = lagrangian_dynamics(L, m);
  REQUIRE(lag.explicit_form.has_value());
  const FirstOrderNames n = first_order_names(m);
  Bindings jets;
  for (int A = 0; A < m; ++A) {
    jets[n.x[A]] = x0[A];
    jets[n.xdot[A]] = v0[A];
  }
  const Trajectory tl = simulate(lag, state_from_jets(lag, jets), 1.0, 1e-4);

  const LegendreHamiltonianField field(L, m);
  OdeProblem p;
  p.rhs = [&](double, std::span<const double> y, std::span<double> d) { field(y, d); };
  p.initial = x0;
  // Matched initial momenta from the Legendre map.
  const auto& state = lag.explicit_form->state;
  for (int A = 0; A < m; ++A) {
    const auto it = std::find(state.begin(), state.end(), n.p[A]);
    p.initial.push_back(tl.states[0][static_cast<std::size_t>(it - state.begin())]);
  }
  p.t_end = 1.0;
  p.dt = 1e-4;
  const Trajectory th = rk4(p);
  REQUIRE(th.states.size() == tl.states.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < th.states.size(); ++k) {
    for (int A = 0; A < m; ++A) {
      for (const auto& [name, offset] : {std::pair{n.x[A], A}, std::pair{n.p[A], m + A}}) {
        const auto it = std::find(state.begin(), state.end(), name);
        const double lv = tl.states[k][static_cast<std::size_t>(it - state.begin())];
        worst = std::max(worst, std::fabs(lv - th.states[k][static_cast<std::size_t>(offset)]));
      }
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("tulczyjew") {

TEST_CASE("alpha shuffles coordinates") {
  const AlphaImage a = alpha(DoublePoint{{1}, {2}, {3}, {4}});
  CHECK(a.x == std::vector<double>{1});
  CHECK(a.xdot == std::vector<double>{3});
  CHECK(a.pdot == std::vector<double>{4});
  CHECK(a.p == std::vector<double>{2});
  const AlphaImage z = alpha(DoublePoint{{0, 0}, {0, 0}, {0, 0}, {0, 0}});
  CHECK(z.x == std::vector<double>{0, 0});
  CHECK(z.p == std::vector<double>{0, 0});
}

TEST_CASE("property: alpha is a bijection given by a unimodular matrix") {
  Gen g(6);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = g.integer(1, 4);
    DoublePoint d;
    for (auto* v : {&d.x, &d.p, &d.xdot, &d.pdot}) {
      for (int i = 0; i < m; ++i) v->push_back(g.uniform(-5, 5));
    }
    const DoublePoint back = alpha_inverse(alpha(d));
    CHECK(back.x == d.x);
    CHECK(back.p == d.p);
    CHECK(back.xdot == d.xdot);
    CHECK(back.pdot == d.pdot);

    const Matrix a = alpha_matrix(m);
    std::vector<double> in;
    for (const auto* v : {&d.x, &d.p, &d.xdot, &d.pdot}) in.insert(in.end(), v->begin(), v->end());
    const AlphaImage img = alpha(d);
    std::vector<double> expected;
    for (const auto* v : {&img.x, &img.xdot, &img.pdot, &img.p}) expected.insert(expected.end(), v->begin(), v->end());
    for (std::size_t i = 0; i < in.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < in.size(); ++j) s += a[i][j] * in[j];
      CHECK(s == expected[i]);
    }
    CHECK(std::fabs(determinant(a)) == 1.0);
  }
}

TEST_CASE("Lagrangian phase dynamics of the free particle and the oscillator") {
  Gen g(2);
  const ELSystem free = lagrangian_dynamics(parse("(xdot1^2 + xdot2^2)/2"), 2);
  const ELSystem osc = lagrangian_dynamics(parse("xdot^2/2 - x^2/2"), 1);
  for (int i = 0; i < 20; ++i) {
    const Bindings a = g.point(first_order_chart(2).names());
    CHECK(residual_at(free, "legendre_p1", a) == doctest::Approx(a.at("p1") - a.at("xdot1")));
    CHECK(residual_at(free, "force_pdot2", a) == doctest::Approx(a.at("pdot2")));
    const Bindings b = g.point(first_order_chart(1).names());
    CHECK(residual_at(osc, "legendre_p", b) == doctest::Approx(b.at("p") - b.at("xdot")));
    CHECK(residual_at(osc, "force_pdot", b) == doctest::Approx(b.at("pdot") + b.at("x")));
  }
  REQUIRE(osc.momenta.size() == 1);
  CHECK(to_string(simplify(osc.momenta[0].value)) == "xdot");
  CHECK(osc.regular);
  CHECK_THROWS(lagrangian_dynamics(parse("xdot^2/2 - q^2"), 1));
}

TEST_CASE("oscillator residuals vanish along x = cos t") {
  const ELSystem osc = lagrangian_dynamics(parse("xdot^2/2 - x^2/2"), 1);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double t = 0.1 * i;
    const Bindings at{{"x", std::cos(t)},   {"xdot", -std::sin(t)}, {"xddot", -std::cos(t)},
                      {"p", -std::sin(t)}, {"pdot", -std::cos(t)}};
    for (const auto& r : osc.residuals) worst = std::max(worst, std::fabs(eval(r, at)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("Hamiltonian dynamics") {
  const ELSystem h = hamiltonian_dynamics(parse("(p1^2 + p2^2)/2"), 2);
  REQUIRE(h.explicit_form.has_value());
  const ExplicitRhs rhs(*h.explicit_form);
  std::vector<double> state(4), rate(4);
  const auto& names = h.explicit_form->state;
  Gen g(9);
  for (auto& s : state) s = g.uniform(-1, 1);
  rhs(state, rate);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "x1") CHECK(rate[i] == state[std::find(names.begin(), names.end(), "p1") - names.begin()]);
    if (names[i] == "p1" || names[i] == "p2") CHECK(rate[i] == 0.0);
  }

  const ELSystem osc = hamiltonian_dynamics(parse("p^2/2 + x^2/2"), 1);
  const Trajectory tr = simulate(osc, state_from_values(osc, {{"x", 1.0}, {"p", 0.0}}), 10.0, 1e-3);
  REQUIRE(tr.conserved_names == std::vector<std::string>{"hamiltonian"});
  CHECK(tr.drift(0) < 1e-8);
  const auto& last = tr.states.back();
  const auto& sn = tr.state_names;
  CHECK(last[std::find(sn.begin(), sn.end(), "x") - sn.begin()] == doctest::Approx(std::cos(10.0)).epsilon(1e-9));
}

TEST_CASE("property: Lagrangian and Hamiltonian trajectories agree for hyperregular Lagrangians") {
  CHECK(legendre_divergence(parse("xdot^2/2 - x^2/2"), 1, {1.0}, {0.0}) < 1e-6);
  CHECK(legendre_divergence(parse("xdot^2/2 + xdot^4/4 - x^2/2"), 1, {0.3}, {0.8}) < 1e-6);
  Gen g(31);
  for (int trial = 0; trial < 3; ++trial) {
    const double k = g.uniform(0.05, 0.2);
    const Expr L = parse("(xdot1^2 + xdot2^2)/2 + xdot1^4/12") + Expr(k) * parse("xdot1*xdot2") -
                   parse("(x1^2 + x2^2)/2 + x1*x2^3/10");
    CHECK(legendre_divergence(L, 2, {g.uniform(-1, 1), g.uniform(-1, 1)}, {g.uniform(-1, 1), g.uniform(-1, 1)}) < 1e-6);
  }
}

TEST_CASE("property: discrete action gradient vanishes along Lagrangian solutions") {
  const ELSystem osc = lagrangian_dynamics(parse("xdot^2/2 - x^2/2"), 1);
  const double dt = 1e-3;
  const Trajectory tr = simulate(osc, state_from_jets(osc, {{"x", 0.4}, {"xdot", 0.9}}), 1.0, dt);
  const ActionDiscretization a(parse("q_1^2/2 - q_0^2/2"), 1, 1, 0.0, dt, tr.time.size());
  std::vector<std::vector<double>> curve;
  for (const auto& s : tr.states) curve.push_back({s[0]});
  const auto grad = action_gradient(a, curve);
  double worst = 0.0;
  for (std::size_t k = a.first_consistent(); k <= a.last_consistent(); ++k) worst = std::max(worst, std::fabs(grad[k][0] / dt));
  CHECK(worst < 1e-6);
}

TEST_CASE("singular Lagrangians have no explicit form") {
  const ELSystem s = lagrangian_dynamics(parse("x*xdot"), 1);
  CHECK_FALSE(s.regular);
  CHECK_FALSE(s.explicit_form.has_value());
}

}  // TEST_SUITE
