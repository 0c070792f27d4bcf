#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "gradmech/chart.hpp"
#include "gradmech/errors.hpp"
#include "gradmech/strings.hpp"
#include "support.hpp"

using namespace gradmech;
using testing::Gen;

namespace {

const Expr kScherk = parse("log(cos(x)/cos(y))");

SurfaceGrid surface(const std::vector<std::string>& components, std::size_t n, double a = -1, double b = 1) {
  std::vector<Expr> exprs;
  for (const auto& c : components) exprs.push_back(parse(c));
  return sample_surface(exprs, "t", "s", a, b, n, a, b, n);
}

GraphSurface scherk(std::size_t n) { return GraphSurface::sample(kScherk, "x", "y", -1, 1, n, -1, 1, n); }

// Max over interior nodes of a field on the finest grid that coincide with
// interior nodes of the coarsest grid (n_coarse nodes per side).
double nested_max(const Grid2D& grid, const std::vector<double>& f, std::size_t n_coarse) {
  const std::size_t step = (grid.nx - 1) / (n_coarse - 1);
  double worst = 0.0;
  for (std::size_t I = 1; I + 1 < n_coarse; ++I) {
    for (std::size_t J = 1; J + 1 < n_coarse; ++J) worst = std::max(worst, std::fabs(f[grid.index(I * step, J * step)]));
  }
  return worst;
}

double max_error(const GraphSurface& a, const GraphSurface& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.z.size(); ++k) worst = std::max(worst, std::fabs(a.z[k] - b.z[k]));
  return worst;
}

}  // namespace

TEST_SUITE("strings") {

TEST_CASE("prolongation examples") {
  SUBCASE("plane") {
    const SurfaceGrid S = surface({"t", "s", "2*t - 3*s"}, 9);
    const auto xd = prolong(S);
    REQUIRE(xd.size() == 3);
    for (std::size_t k = 0; k < S.grid.size(); ++k) {
      CHECK(xd[0][k] == doctest::Approx(1.0));
      CHECK(xd[1][k] == doctest::Approx(-3.0));
      CHECK(xd[2][k] == doctest::Approx(-2.0));
    }
  }
  SUBCASE("saddle t*s is reproduced exactly") {
    const SurfaceGrid S = surface({"t", "s", "t*s"}, 9);
    const auto xd = prolong(S);
    for (std::size_t i = 0; i < S.grid.nx; ++i) {
      for (std::size_t j = 0; j < S.grid.ny; ++j) {
        const std::size_t k = S.grid.index(i, j);
        CHECK(xd[1][k] == doctest::Approx(S.grid.x(i)).epsilon(1e-12).scale(1.0));
        CHECK(xd[2][k] == doctest::Approx(-S.grid.y(j)).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("property: swapping the parameters negates the bivector exactly") {
  Gen g(77);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Expr> comps;
    for (int c = 0; c < 3; ++c) comps.push_back(g.smooth({"t", "s"}, 3));
    const SurfaceGrid S = sample_surface(comps, "t", "s", -1, 1, 11, -1, 1, 11);
    const SurfaceGrid Sw = sample_surface(comps, "s", "t", -1, 1, 11, -1, 1, 11);
    const auto a = prolong(S);
    const auto b = prolong(Sw);
    bool exact = true;
    for (std::size_t c = 0; c < a.size(); ++c) {
      for (std::size_t i = 0; i < 11; ++i) {
        for (std::size_t j = 0; j < 11; ++j) exact = exact && (b[c][S.grid.index(i, j)] == -a[c][S.grid.index(j, i)]);
      }
    }
    CHECK(exact);
  }
}

TEST_CASE("string residual") {
  SUBCASE("planes are critical for the area") {
    CHECK(el_residual(area_lagrangian(3), surface({"t", "s", "0.3*t + 0.7*s + 1"}, 17)).max_interior() < 1e-8);
  }
  SUBCASE("Scherk graph converges at second order") {
    std::vector<double> h, err;
    std::vector<double> all;
    for (std::size_t n : {33u, 65u, 129u}) {
      const ResidualField r = el_residual(area_lagrangian(3), scherk(n).embed());
      h.push_back(2.0 / static_cast<double>(n - 1));
      double worst = 0.0;
      for (const auto& comp : r.r) worst = std::max(worst, nested_max(r.grid, comp, 33));
      err.push_back(worst);
      all.push_back(r.max_interior());
    }
    CHECK(testing::loglog_slope(h, err) > 1.8);
    CHECK(all.back() < all.front() / 8);
  }
  SUBCASE("null Lagrangian") {
    const BivectorLagrangian L(3, parse("xd1_2"));
    const ResidualField r = el_residual(L, surface({"t + s^2", "sin(s) + t*s", "exp(t)*cos(s)"}, 17));
    CHECK(r.max_interior() == 0.0);
  }
  SUBCASE("evaluation errors name the node") {
    const BivectorLagrangian L(3, parse("log(x1) + xd1_2"));
    try {
      el_residual(L, surface({"t", "s", "0"}, 9));
      FAIL("expected EvalError");
    } catch (const EvalError& e) {
      CHECK(std::string(e.what()).find("at node (") != std::string::npos);
    }
  }
  SUBCASE("dimension mismatch and foreign variables") {
    CHECK_THROWS_AS(el_residual(area_lagrangian(2), surface({"t", "s", "t"}, 9)), InvalidArgument);
    CHECK_THROWS_AS(BivectorLagrangian(2, parse("xd2_1")), ChartError);
    CHECK_THROWS_AS(BivectorLagrangian(2, parse("x3")), ChartError);
  }
}

TEST_CASE("property: the string residual is reparametrization covariant") {
  // Re-gridding the Scherk graph through orientation-preserving maps of the
  // square onto itself keeps the residual at the truncation level.
  const double original = el_residual(area_lagrangian(3), scherk(65).embed()).max_interior();
  Gen g(5);
  for (int trial = 0; trial < 5; ++trial) {
    const std::string a = format_number(g.uniform(0.01, 0.08));
    const std::string b = format_number(g.uniform(0.01, 0.08));
    const std::string u = "(t + " + a + "*sin(3.141592653589793*t))";
    const std::string v = "(s + " + b + "*sin(3.141592653589793*s) + " + a + "*(1 - s^2)*(1 - t^2)/4)";
    const std::string z = "log(cos" + u + "/cos" + v + ")";
    const double mapped = el_residual(area_lagrangian(3), surface({u, v, z}, 65)).max_interior();
    CAPTURE(u);
    CAPTURE(v);
    CHECK(mapped < 2.0 * original);
  }
  CHECK(check_homogeneity(area_lagrangian(3).L, Chart::weighted({{"xd1_2", 1}, {"xd1_3", 1}, {"xd2_3", 1}}), 1));
}

TEST_CASE("minimal-surface operator") {
  const auto affine = GraphSurface::sample(parse("1 + 2*x - 0.5*y"), "x", "y", 0, 1, 9, 0, 1, 9);
  CHECK(max_interior(affine.grid, minimal_surface_residual(affine)) < 1e-12);
  const auto parab = GraphSurface::sample(parse("x^2"), "x", "y", -1, 1, 9, -1, 1, 9);
  const auto ms = minimal_surface_residual(parab);
  for (std::size_t i = 1; i + 1 < 9; ++i) {
    for (std::size_t j = 1; j + 1 < 9; ++j) CHECK(ms[parab.grid.index(i, j)] == doctest::Approx(2.0));
  }
  const auto s65 = scherk(65);
  const auto s129 = scherk(129);
  const double r65 = max_interior(s65.grid, minimal_surface_residual(s65));
  CHECK(r65 < 5e-3);
  const double nested65 = nested_max(s65.grid, minimal_surface_residual(s65), 65);
  const double nested129 = nested_max(s129.grid, minimal_surface_residual(s129), 65);
  CHECK(nested65 / nested129 > 3.5);
}

TEST_CASE("Plateau solver") {
  SUBCASE("affine data") {
    const auto affine = GraphSurface::sample(parse("1 + 2*x - 0.5*y"), "x", "y", 0, 1, 33, 0, 1, 33);
    const PlateauResult r = solve_plateau(affine);
    CHECK(r.iterations <= 2);
    CHECK(max_error(r.surface, affine) < 1e-9);
  }
  SUBCASE("Scherk data") {
    const auto exact = scherk(65);
    const auto t0 = std::chrono::steady_clock::now();
    const PlateauResult r = solve_plateau(exact);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(seconds < 10.0);
    CHECK(r.residual < 1e-10);
    CHECK(max_error(r.surface, exact) < 1e-3);
    REQUIRE(!r.log.empty());
    CHECK(r.log.front().first == 0);
    CHECK(r.log.back().second == doctest::Approx(r.residual));

    PlateauOptions again;
    again.initial_guess = r.surface.z;
    CHECK(solve_plateau(exact, again).iterations == 0);
  }
  SUBCASE("curved data differs from the harmonic interpolant") {
    const auto bowl = GraphSurface::sample(parse("x^2 + y^2"), "x", "y", -1, 1, 33, -1, 1, 33);
    const PlateauResult r = solve_plateau(bowl);
    const GraphSurface h = harmonic_interpolation(bowl);
    CHECK(max_error(r.surface, h) > 1e-3);
    CHECK(max_interior(r.surface.grid, minimal_surface_residual(r.surface)) < 1e-8);
  }
  SUBCASE("iteration limit") {
    PlateauOptions tight;
    tight.max_iter = 1;
    tight.tolerance = 1e-14;
    try {
      solve_plateau(scherk(33), tight);
      FAIL("expected NoConvergence");
    } catch (const NoConvergence& e) {
      CHECK(e.iterations() == 1);
      CHECK(e.residual() > 1e-14);
    }
  }
}

TEST_CASE("string residual and minimal-surface operator agree on graphs") {
  const BivectorLagrangian area = area_lagrangian(3);
  const auto affine = GraphSurface::sample(parse("1 + 2*x - 0.5*y"), "x", "y", 0, 1, 17, 0, 1, 17);
  CHECK(consistency_check(area, affine) < 1e-10);
  CHECK(consistency_check(area, scherk(33)) < 1e-10);
  const auto bump = GraphSurface::sample(parse("exp(-3*(x^2 + y^2))"), "x", "y", -1, 1, 33, -1, 1, 33);
  CHECK(max_interior(bump.grid, minimal_surface_residual(bump)) > 1e-1);
  CHECK(el_residual(area, bump.embed()).max_interior() > 1e-2);
  CHECK(consistency_check(area, bump) < 1e-10);
}

TEST_CASE("discrete area") {
  const auto plane = GraphSurface::sample(parse("2*x + 2*y"), "x", "y", 0, 1, 9, 0, 1, 9);
  CHECK(discrete_area(plane) == doctest::Approx(3.0));

  std::vector<double> a;
  for (std::size_t n : {17u, 33u, 65u}) a.push_back(discrete_area(GraphSurface::sample(kScherk, "x", "y", -1, 1, n, -1, 1, n)));
  CHECK((a[0] - a[1]) / (a[1] - a[2]) == doctest::Approx(4.0).epsilon(0.1));

  const auto bump = GraphSurface::sample(parse("exp(-3*(x^2 + y^2)) + 0.2*x*y"), "x", "y", -1, 1, 9, -1, 1, 9);
  const auto grad = discrete_area_gradient(bump);
  for (std::size_t k = 0; k < bump.z.size(); k += 7) {
    GraphSurface up = bump, down = bump;
    up.z[k] += 1e-6;
    down.z[k] -= 1e-6;
    CHECK(grad[k] == doctest::Approx((discrete_area(up) - discrete_area(down)) / 2e-6).epsilon(1e-6).scale(1e-6));
  }
}

TEST_CASE("surface import and export") {
  const SurfaceGrid S = surface({"sin(t)*s", "t^2", "exp(s)/3"}, 7);
  std::stringstream csv;
  write_csv(csv, S);
  const SurfaceGrid back = read_surface_csv(csv);
  CHECK(back.m == 3);
  CHECK(back.x == S.x);
  CHECK(back.grid.nx == 7);
  const SurfaceGrid fromjson = surface_from_json(to_json(S));
  CHECK(fromjson.x == S.x);

  const auto g = scherk(9);
  std::stringstream gcsv;
  write_csv(gcsv, g);
  CHECK(read_graph_csv(gcsv).z == g.z);
  CHECK(graph_from_json(to_json(g)).z == g.z);

  std::istringstream bad_header("t,s,y1\n0,0,1\n");
  CHECK_THROWS_AS(read_surface_csv(bad_header), InvalidArgument);
  std::istringstream bad_number("t,s,x1\n0,0,abc\n");
  CHECK_THROWS_AS(read_surface_csv(bad_number), InvalidArgument);
  std::istringstream ragged("t,s,x1\n0,0,1\n0,1\n");
  CHECK_THROWS_AS(read_surface_csv(ragged), InvalidArgument);
  CHECK_THROWS_AS(surface_from_json("{\"m\": 1}"), InvalidArgument);

  SurfaceGrid small = surface({"t", "s"}, 5);
  small.x[0][3] = std::nan("");
  CHECK_THROWS_AS(small.validate(), InvalidArgument);
  CHECK(csv_number(0.1) == "0.10000000000000001");
}

}  // TEST_SUITE
