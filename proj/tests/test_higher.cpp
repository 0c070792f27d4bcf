#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gradmech/errors.hpp"
#include "gradmech/higher.hpp"
#include "gradmech/tulczyjew.hpp"
#include "support.hpp"

using namespace gradmech;
using testing::Gen;

namespace {

std::size_t slot(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  REQUIRE(it != names.end());
  return static_cast<std::size_t>(it - names.begin());
}

LagrangianSpec javelin() {
  return LagrangianSpec(tangent_algebroid(3), 2,
                        parse("(y1_1^2 + y2_1^2 + y3_1^2 - y1_2^2 - y2_2^2 - y3_2^2)/2"));
}

std::array<double, 3> cross(const std::array<double, 3>& u, const std::array<double, 3>& v) {
  return {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
}

}  // namespace

TEST_SUITE("higher") {

TEST_CASE("momenta of the javelin Lagrangian") {
  const MomentaSet m = momenta(javelin());
  REQUIRE(m.order == 2);
  Gen g(4);
  for (int i = 0; i < 20; ++i) {
    const Bindings at = g.point(m.chart.names());
    for (int b = 0; b < 3; ++b) {
      const std::string s = std::to_string(b + 1);
      CHECK(eval(m.at(1, b), at) == doctest::Approx(-0.5 * at.at("y" + s + "_2")));
      CHECK(eval(m.at(2, b), at) == doctest::Approx(at.at("y" + s + "_1") + 1.5 * at.at("y" + s + "_3")));
    }
  }
}

TEST_CASE("first order on an abelian algebra is a conservation law") {
  const LagrangianSpec spec(abelian(2), 1, parse("(y1_1^2 + 3*y2_1^2)/2"));
  const ELSystem sys = el_equations(spec);
  Gen g(8);
  for (int i = 0; i < 20; ++i) {
    const Bindings at = g.point(sys.chart.names());
    CHECK(eval(sys.residuals[0], at) == doctest::Approx(-2 * at.at("y1_2")));
    CHECK(eval(sys.residuals[1], at) == doctest::Approx(-6 * at.at("y2_2")));
  }
}

TEST_CASE("a zero anchor removes the base dependence") {
  std::vector<std::vector<Expr>> anchor{{Expr(0.0)}};
  std::vector<std::vector<std::vector<Expr>>> structure{{{Expr(0.0)}}};
  const AlgebroidSpec alg = make_algebroid("bundle", 1, 1, anchor, structure);
  const LagrangianSpec spec(alg, 1, parse("y_1^2/2 - x^2/2"));
  const ELSystem sys = el_equations(spec);
  for (const auto& r : sys.residuals) CHECK(free_variables(r).count("x") == 0);
}

TEST_CASE("property: so3 higher Euler equations match a direct rigid-body formula") {
  const std::array<double, 3> I{1.0, 2.0, 3.0};
  Gen g(12);
  SUBCASE("first order") {
    const ELSystem sys = el_equations(LagrangianSpec(so3(), 1, parse("(y1_1^2 + 2*y2_1^2 + 3*y3_1^2)/2")));
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const Bindings at = g.point(sys.chart.names());
      std::array<double, 3> y{}, Iy{};
      for (int a = 0; a < 3; ++a) {
        y[a] = at.at("y" + std::to_string(a + 1) + "_1");
        Iy[a] = I[a] * y[a];
      }
      const auto f = cross(Iy, y);
      for (int a = 0; a < 3; ++a) {
        const double expected = f[a] - 2 * I[a] * at.at("y" + std::to_string(a + 1) + "_2");
        worst = std::max(worst, std::fabs(eval(sys.residuals[a], at) - expected));
      }
    }
    CHECK(worst < 1e-8);
  }
  SUBCASE("second order") {
    const ELSystem sys = el_equations(LagrangianSpec(so3(), 2, parse("(y1_2^2 + 2*y2_2^2 + 3*y3_2^2)/2")));
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const Bindings at = g.point(sys.chart.names());
      std::array<double, 3> y1{}, pi{};
      for (int a = 0; a < 3; ++a) {
        const std::string s = std::to_string(a + 1);
        y1[a] = at.at("y" + s + "_1");
        pi[a] = -1.5 * I[a] * at.at("y" + s + "_3");
      }
      const auto f = cross(pi, y1);
      for (int a = 0; a < 3; ++a) {
        const double expected = f[a] + 6 * I[a] * at.at("y" + std::to_string(a + 1) + "_4");
        worst = std::max(worst, std::fabs(eval(sys.residuals[a], at) - expected));
      }
    }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("javelin base equation") {
  const BaseEquation be = base_equation(javelin(), 1);
  CHECK(be.matches_form);
  CHECK(be.base_coefficient == doctest::Approx(-0.25));
  CHECK(be.jet_coefficient == doctest::Approx(-0.5));
  const OracleFit fit = oracle_base_coefficient(javelin(), 1);
  CHECK(fit.coefficient == doctest::Approx(be.base_coefficient).epsilon(1e-3));
  CHECK_THROWS_AS(base_equation(javelin(), 4), InvalidArgument);
}

TEST_CASE("classical Euler-Lagrange examples") {
  Gen g(3);
  const ELSystem osc = classical_el(1, parse("q_1^2/2 - q_0^2/2"));
  const ELSystem beam = classical_el(2, parse("q_2^2/2"));
  for (int i = 0; i < 20; ++i) {
    const Bindings a = g.point(osc.chart.names());
    CHECK(eval(osc.residuals[0], a) == doctest::Approx(-a.at("q_0") - a.at("q_2")));
    const Bindings b = g.point(beam.chart.names());
    CHECK(eval(beam.residuals[0], b) == doctest::Approx(b.at("q_4")));
  }
  CHECK_THROWS(classical_el(0, parse("q_1")));
}

TEST_CASE("reduction to the classical equations") {
  CHECK(reduce_check(javelin()) < 1e-9);
  CHECK(reduce_check(LagrangianSpec(tangent_algebroid(1), 1, parse("y_1^2/2"))) < 1e-9);
  CHECK(reduce_check(LagrangianSpec(tangent_algebroid(1), 2, parse("y_2^2"))) < 1e-9);
}

TEST_CASE("property: reduce_check vanishes for random polynomial Lagrangians") {
  Gen g(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = g.integer(1, 3);
    const int m = g.integer(1, 3);
    const LagrangianSpec probe(tangent_algebroid(m), k, Expr(0.0));
    std::vector<std::string> vars;
    Expr top(0.0);
    const Chart chart = probe.chart();
    for (const auto& v : chart.vars()) {
      vars.push_back(v.name);
      if (v.order == k && v.family != "x") top = top + Expr::var(v.name) * Expr::var(v.name) / Expr(2.0);
    }
    const Expr L = top + g.polynomial(vars, 4, 2);
    CAPTURE(to_string(L));
    CHECK(reduce_check(LagrangianSpec(tangent_algebroid(m), k, L), {.samples = 50, .seed = 11}) < 1e-8);
  }
}

TEST_CASE("simulation") {
  SUBCASE("free particle") {
    const ELSystem sys = el_equations(LagrangianSpec(tangent_algebroid(1), 1, parse("y_1^2/2")));
    const Trajectory tr = simulate(sys, state_from_jets(sys, {{"x", 0.0}, {"y_1", 1.0}}), 1.0, 1e-2);
    CHECK(std::fabs(tr.states.back()[slot(tr.state_names, "x")] - 1.0) < 1e-10);
    CHECK(tr.time.back() == doctest::Approx(1.0));
  }
  SUBCASE("oscillator") {
    const ELSystem sys = el_equations(LagrangianSpec(tangent_algebroid(1), 1, parse("y_1^2/2 - x^2/2")));
    const Trajectory tr = simulate(sys, state_from_jets(sys, {{"x", 1.0}}), 5.0, 1e-3);
    CHECK(tr.states.back()[slot(tr.state_names, "x")] == doctest::Approx(std::cos(5.0)).epsilon(1e-9));
    CHECK(tr.drift(slot(tr.conserved_names, "energy")) < 1e-8);
  }
  SUBCASE("so3 casimir") {
    const ELSystem sys = el_equations(LagrangianSpec(so3(), 2, parse("2*(y1_2^2 + 2*y2_2^2 + 3*y3_2^2)")));
    const Bindings jets{{"y1_1", 0.1}, {"y2_1", -0.05}, {"y3_1", 0.08}, {"y1_2", 0.03},
                        {"y2_2", 0.07}, {"y3_2", -0.04}, {"y1_3", 0.02}, {"y2_3", -0.01}, {"y3_3", 0.05}};
    const Trajectory tr = simulate(sys, state_from_jets(sys, jets), 10.0, 1e-3);
    CHECK(tr.drift(slot(tr.conserved_names, "casimir")) < 1e-8);
  }
  SUBCASE("bad jets") {
    const ELSystem sys = el_equations(LagrangianSpec(tangent_algebroid(1), 1, parse("y_1^2/2")));
    CHECK_THROWS_AS(state_from_jets(sys, {{"nope", 1.0}}), InvalidArgument);
  }
}

TEST_CASE("degenerate Lagrangians are rejected") {
  CHECK_THROWS_AS(el_equations(LagrangianSpec(tangent_algebroid(1), 1, parse("x*y_1"))), SingularLegendre);
  CHECK_THROWS_AS(el_equations(LagrangianSpec(so3(), 2, parse("y1_2^2 + y2_2^2"))), SingularLegendre);
  CHECK_THROWS(LagrangianSpec(tangent_algebroid(1), 1, parse("y_2^2")));
  CHECK_THROWS(LagrangianSpec(tangent_algebroid(1), 0, parse("y_1")));
}

TEST_CASE("explicit forms agree with the residual equations") {
  CHECK(explicit_consistency(el_equations(javelin())) < 1e-8);
  CHECK(explicit_consistency(el_equations(LagrangianSpec(so3(), 2, parse("(y1_2^2 + 2*y2_2^2 + 3*y3_2^2)/2")))) < 1e-8);
  CHECK(explicit_consistency(classical_el(2, parse("q_2^2/2 + q_1^2/2 - q_0^4"))) < 1e-8);
}

TEST_CASE("first-order algebroid equations agree with Lagrangian phase dynamics") {
  const ELSystem alg = el_equations(LagrangianSpec(tangent_algebroid(1), 1, parse("y_1^2/2 - x^4/4 + x*y_1^2")));
  const ELSystem lag = lagrangian_dynamics(parse("xdot^2/2 - x^4/4 + x*xdot^2"), 1);
  const std::size_t row = slot(lag.residual_names, "euler_lagrange_x");
  Gen g(41);
  for (int i = 0; i < 50; ++i) {
    const double x = g.uniform(-1, 1), v = g.uniform(-1, 1), acc = g.uniform(-1, 1);
    const double r_alg = eval(alg.residuals[0], {{"x", x}, {"y_1", v}, {"y_2", acc / 2}});
    const double r_lag = eval(lag.residuals[row], {{"x", x}, {"xdot", v}, {"xddot", acc}, {"p", 0.0}, {"pdot", 0.0}});
    CHECK(std::fabs(r_alg - r_lag) < 1e-12);
  }
}

TEST_CASE("second-order Lie algebra equations in g2 coordinates") {
  const Expr L = parse("(z1^2 + 2*z2^2 + 3*z3^2)/2 + x1*z2");
  CHECK(g2_consistency(L, so3(), AdStarConvention::kRight) < 1e-10);
  CHECK(g2_consistency(L, so3(), AdStarConvention::kLeft) > 1e-3);
  const Expr La = parse("(z1^2 + z2^2)/2");
  CHECK(g2_consistency(La, abelian(2), AdStarConvention::kRight) < 1e-10);
  CHECK(g2_consistency(La, abelian(2), AdStarConvention::kLeft) < 1e-10);
  const ELSystem sys = g2_pipeline(L, so3());
  CHECK(sys.residuals.size() >= 3);
  CHECK_THROWS(g2_pipeline(L, tangent_algebroid(3)));
}

}  // TEST_SUITE
