#include <doctest.h>

#include <cmath>

#include "gradmech/errors.hpp"
#include "gradmech/higher.hpp"
#include "gradmech/numerics.hpp"
#include "support.hpp"

using namespace gradmech;
using testing::Gen;

namespace {

double rk4_error_exp(double dt) {
  OdeProblem p;
  p.rhs = [](double, std::span<const double> y, std::span<double> d) { d[0] = y[0]; };
  p.initial = {1.0};
  p.t_end = 1.0;
  p.dt = dt;
  return std::fabs(rk4(p).states.back()[0] - std::exp(1.0));
}

std::vector<std::vector<double>> sample_curve(const std::function<double(double)>& f, double t0, double dt,
                                              std::size_t n) {
  std::vector<std::vector<double>> c(n, std::vector<double>(1));
  for (std::size_t i = 0; i < n; ++i) c[i][0] = f(t0 + static_cast<double>(i) * dt);
  return c;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("rk4 examples") {
  OdeProblem zero;
  zero.rhs = [](double, std::span<const double>, std::span<double> d) { d[0] = 0.0; };
  zero.initial = {1.0};
  zero.t_end = 3.0;
  zero.dt = 0.1;
  const Trajectory tz = rk4(zero);
  for (const auto& s : tz.states) CHECK(s[0] == 1.0);
  CHECK(tz.time.back() == 3.0);
  for (std::size_t i = 1; i < tz.time.size(); ++i) CHECK(tz.time[i] > tz.time[i - 1]);

  CHECK(rk4_error_exp(1e-3) < 1e-8);

  OdeProblem osc;
  osc.rhs = [](double, std::span<const double> y, std::span<double> d) {
    d[0] = y[1];
    d[1] = -y[0];
  };
  osc.initial = {1.0, 0.0};
  osc.t_end = 10.0;
  osc.dt = 1e-3;
  const Trajectory to = rk4(osc);
  double drift = 0.0;
  for (const auto& s : to.states) drift = std::max(drift, std::fabs(0.5 * (s[0] * s[0] + s[1] * s[1]) - 0.5));
  CHECK(drift < 1e-8);
}

TEST_CASE("rk4 converges at fourth order") {
  std::vector<double> h{0.1, 0.05, 0.025, 0.0125};
  std::vector<double> e;
  for (double dt : h) e.push_back(rk4_error_exp(dt));
  CHECK(testing::loglog_slope(h, e) >= 3.9);
}

TEST_CASE("rk4 stops on non-finite states") {
  OdeProblem blow;
  blow.rhs = [](double, std::span<const double> y, std::span<double> d) { d[0] = y[0] * y[0]; };
  blow.initial = {1.0};
  blow.t_end = 2.0;
  blow.dt = 1e-3;
  CHECK_THROWS_AS(rk4(blow), NonFinite);
}

TEST_CASE("central stencils are exact on low-degree polynomials") {
  for (int order = 0; order <= 6; ++order) {
    const auto w = central_stencil(order);
    const int h = static_cast<int>(w.size() / 2);
    // d^order/dt^order t^order / order! = 1 at t = 0 with unit spacing.
    for (int deg = 0; deg <= order + 1; ++deg) {
      double sum = 0.0;
      for (int j = -h; j <= h; ++j) sum += w[j + h] * std::pow(static_cast<double>(j), deg);
      const double expected = deg == order ? std::tgamma(order + 1.0) : 0.0;
      CHECK(sum == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(central_stencil(7), InvalidArgument);
}

TEST_CASE("fd_partials examples") {
  const Grid2D g = Grid2D::span(-1, 1, 21, 0, 2, 17);
  std::vector<double> xx(g.size()), xy(g.size()), quad(g.size()), s(g.size());
  Gen gen(4);
  const double c[6] = {gen.uniform(-1, 1), gen.uniform(-1, 1), gen.uniform(-1, 1),
                       gen.uniform(-1, 1), gen.uniform(-1, 1), gen.uniform(-1, 1)};
  for (std::size_t i = 0; i < g.nx; ++i) {
    for (std::size_t j = 0; j < g.ny; ++j) {
      const double x = g.x(i), y = g.y(j);
      xx[g.index(i, j)] = x * x;
      xy[g.index(i, j)] = x * y;
      quad[g.index(i, j)] = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
    }
  }
  const Partials pxx = fd_partials(g, xx);
  const Partials pxy = fd_partials(g, xy);
  const Partials pq = fd_partials(g, quad);
  for (std::size_t i = 0; i < g.nx; ++i) {
    for (std::size_t j = 0; j < g.ny; ++j) {
      const std::size_t k = g.index(i, j);
      const double x = g.x(i), y = g.y(j);
      if (g.interior(i, j)) {
        CHECK(pxx.fxx[k] == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(pxy.fxy[k] == doctest::Approx(1.0).epsilon(1e-10));
      }
      // Exact on quadratics everywhere, edges included.
      CHECK(pq.fx[k] == doctest::Approx(c[1] + 2 * c[3] * x + c[4] * y).epsilon(1e-9));
      CHECK(pq.fy[k] == doctest::Approx(c[2] + c[4] * x + 2 * c[5] * y).epsilon(1e-9));
      CHECK(pq.fxx[k] == doctest::Approx(2 * c[3]).epsilon(1e-8));
      CHECK(pq.fxy[k] == doctest::Approx(c[4]).epsilon(1e-8));
      CHECK(pq.fyy[k] == doctest::Approx(2 * c[5]).epsilon(1e-8));
    }
  }
}

TEST_CASE("fd_partials is second order on sin") {
  std::vector<double> h, err;
  for (std::size_t n : {17u, 33u, 65u, 129u}) {
    const Grid2D g = Grid2D::span(0, 1, n, 0, 1, 5);
    std::vector<double> f(g.size());
    for (std::size_t i = 0; i < g.nx; ++i)
      for (std::size_t j = 0; j < g.ny; ++j) f[g.index(i, j)] = std::sin(g.x(i));
    const Partials p = fd_partials(g, f);
    double e = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) e = std::max(e, std::fabs(p.fx[g.index(i, 2)] - std::cos(g.x(i))));
    h.push_back(g.hx);
    err.push_back(e);
  }
  CHECK(testing::loglog_slope(h, err) >= 1.9);
}

TEST_CASE("dense_solve examples") {
  CHECK(dense_solve({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {3, -2, 5}) == std::vector<double>{3, -2, 5});
  const auto x = dense_solve({{2, 0}, {0, 4}}, {2, 8});
  CHECK(x[0] == 1.0);
  CHECK(x[1] == 2.0);
  CHECK_THROWS_AS(dense_solve({{1, 2}, {2, 4}}, {1, 1}), SingularJacobian);
  CHECK(determinant({{1, 2}, {2, 4}}) == 0.0);
  CHECK(determinant({{0, 1}, {1, 0}}) == -1.0);
  CHECK(std::isinf(condition_number({{1, 2}, {2, 4}})));
}

TEST_CASE("property: dense_solve has small backward error") {
  Gen g(50);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 50;
    Matrix a(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a[i][j] = g.uniform(-1, 1);
      a[i][i] += 10.0;
    }
    std::vector<double> b(n);
    for (auto& v : b) v = g.uniform(-1, 1);
    const auto x = dense_solve(a, b);
    double res = 0.0, bn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = -b[i];
      for (std::size_t j = 0; j < n; ++j) r += a[i][j] * x[j];
      res = std::max(res, std::fabs(r));
      bn = std::max(bn, std::fabs(b[i]));
    }
    CHECK(res < 1e-12 * bn * 10);
  }
}

TEST_CASE("property: banded and dense solves agree") {
  Gen g(51);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 40, lo = static_cast<std::size_t>(g.integer(1, 6)), up = static_cast<std::size_t>(g.integer(1, 6));
    BandMatrix band(n, lo, up);
    Matrix dense(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = (i >= lo ? i - lo : 0); j <= std::min(n - 1, i + up); ++j) {
        // Weak diagonal so that pivoting matters.
        const double v = g.uniform(-1, 1) + (i == j ? 0.1 : 0.0);
        band.at(i, j) = v;
        dense[i][j] = v;
      }
    }
    std::vector<double> b(n);
    for (auto& v : b) v = g.uniform(-1, 1);
    const auto xb = band.solve(b);
    const auto xd = dense_solve(dense, b);
    const auto ax = band.multiply(xb);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(xb[i] == doctest::Approx(xd[i]).epsilon(1e-8));
      CHECK(ax[i] == doctest::Approx(b[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("action_gradient: free particle on a straight line") {
  const ActionDiscretization a(parse("q_1^2/2"), 1, 1, 0.0, 0.01, 101);
  const auto curve = sample_curve([](double t) { return 0.3 + 2.0 * t; }, 0.0, 0.01, 101);
  const auto grad = action_gradient(a, curve);
  for (std::size_t n = a.first_consistent(); n <= a.last_consistent(); ++n) CHECK(std::fabs(grad[n][0]) < 1e-12);
}

TEST_CASE("action_gradient: oscillator along cos is second-order consistent") {
  std::vector<double> h, err;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    const std::size_t n = static_cast<std::size_t>(std::lround(2.0 / dt)) + 1;
    const ActionDiscretization a(parse("q_1^2/2 - q_0^2/2"), 1, 1, 0.0, dt, n);
    const auto grad = action_gradient(a, sample_curve([](double t) { return std::cos(t); }, 0.0, dt, n));
    double e = 0.0;
    for (std::size_t k = a.first_consistent(); k <= a.last_consistent(); ++k) e = std::max(e, std::fabs(grad[k][0] / dt));
    h.push_back(dt);
    err.push_back(e);
  }
  CHECK(testing::loglog_slope(h, err) >= 1.9);
}

TEST_CASE("property: action_gradient is the exact derivative of the action") {
  Gen g(77);
  const std::vector<std::string> vars{"q_0", "q_1", "q_2"};
  for (int trial = 0; trial < 8; ++trial) {
    const Expr L = g.polynomial(vars, 5, 3);
    const double dt = 0.05;
    const std::size_t n = 25;
    const ActionDiscretization a(L, 2, 1, 0.0, dt, n);
    std::vector<std::vector<double>> curve(n, std::vector<double>(1));
    for (auto& c : curve) c[0] = g.uniform(-1, 1);
    const auto grad = a.gradient(curve);
    for (std::size_t k = 0; k < n; ++k) {
      auto up = curve, down = curve;
      up[k][0] += 1e-6;
      down[k][0] -= 1e-6;
      const double fd = (a.action(up) - a.action(down)) / 2e-6;
      CHECK(std::fabs(grad[k][0] - fd) <= 1e-6 * std::max(1.0, std::fabs(fd)));
    }
  }
}

TEST_CASE("action_gradient of a second-order Lagrangian matches the classical residual") {
  // Javelin-type L on a single component: gradient / dt -> residual as dt -> 0.
  const Expr L = parse("q_1^2/2 - q_2^2/8");
  const ELSystem sys = classical_el(2, L, 1, DeriveOptions{false, 20, 1});
  const Expr R = sys.residuals[0];
  auto curve_fn = [](double t) { return std::sin(3 * t) + 0.5 * std::cos(5 * t + 0.2); };
  auto deriv = [](double t, int k) {
    const double s1 = std::pow(3.0, k), s2 = std::pow(5.0, k);
    const double a = 3 * t + k * M_PI / 2, b = 5 * t + 0.2 + k * M_PI / 2;
    return s1 * std::sin(a) + 0.5 * s2 * std::cos(b);
  };
  std::vector<double> h, err;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    const std::size_t n = static_cast<std::size_t>(std::lround(1.0 / dt)) + 1;
    const ActionDiscretization a(L, 2, 1, 0.0, dt, n);
    const auto grad = action_gradient(a, sample_curve(curve_fn, 0.0, dt, n));
    double e = 0.0;
    for (std::size_t k = a.first_consistent(); k <= a.last_consistent(); ++k) {
      const double t = a.time(k);
      Bindings at;
      for (int i = 0; i <= 4; ++i) at["q_" + std::to_string(i)] = deriv(t, i);
      e = std::max(e, std::fabs(grad[k][0] / dt - eval(R, at)));
    }
    h.push_back(dt);
    err.push_back(e);
  }
  CHECK(testing::loglog_slope(h, err) >= 1.9);
}

}  // TEST_SUITE
