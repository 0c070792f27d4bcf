#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "gradmech/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
  json report() const { return json::parse(out); }
};

fs::path config(const std::string& name) { return fs::path(GRADMECH_SOURCE_DIR) / "configs" / name; }

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gradmech_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "gradmech");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = gradmech::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

Result run(const std::string& command, const std::string& cfg, const fs::path& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{command, "--config", config(cfg).string(), "--out", out.string()};
  args.insert(args.end(), extra.begin(), extra.end());
  return run(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const json* check_named(const json& report, const std::string& name) {
  for (const auto& c : report["checks"]) {
    if (c["name"] == name) return &c;
  }
  return nullptr;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("derive writes equations for the javelin") {
  const fs::path dir = fresh_dir("javelin");
  const Result r = run("derive", "javelin.json", dir);
  REQUIRE(r.code == 0);
  const json rep = r.report();
  CHECK(rep["status"] == "ok");
  const json* reduce = check_named(rep, "reduce_check");
  REQUIRE(reduce != nullptr);
  CHECK((*reduce)["passed"] == true);
  CHECK(rep["base_equations"][0]["base_coefficient"].get<double>() == doctest::Approx(-0.25));
  CHECK(rep["base_equations"][0]["reference"]["jet_agrees_up_to_sign"] == true);
  CHECK(fs::exists(dir / "equations.txt"));
  CHECK(fs::exists(dir / "report.json"));
  const std::string tex = slurp(dir / "equations.tex");
  CHECK(tex.find("\\begin{align*}") != std::string::npos);

  const Result latex = run("derive", "javelin.json", fresh_dir("javelin_tex"), {"--latex"});
  CHECK(latex.code == 0);
  CHECK(latex.out.rfind("\\documentclass{article}", 0) == 0);
}

TEST_CASE("derive renders first-order phase dynamics") {
  const Result r = run("derive", "oscillator.json", fresh_dir("osc"), {"--latex"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("p &= \\dot{x}") != std::string::npos);
  CHECK(r.out.find("\\dot{p} &= -x") != std::string::npos);
}

TEST_CASE("derive on so3 includes the higher Euler equations") {
  const Result r = run("derive", "so3.json", fresh_dir("so3"), {"--latex"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Higher Euler equations") != std::string::npos);
  const Result j = run("derive", "so3.json", fresh_dir("so3j"));
  const json rep = j.report();
  const json* g2 = check_named(rep, "g2_consistency");
  REQUIRE(g2 != nullptr);
  CHECK((*g2)["value"].get<double>() < 1e-8);
}

TEST_CASE("simulate writes trajectories") {
  SUBCASE("free particle") {
    const fs::path dir = fresh_dir("free");
    const Result r = run("simulate", "free_particle.json", dir);
    REQUIRE(r.code == 0);
    CHECK(r.report()["final_state"]["x"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
    const std::string csv = slurp(dir / "trajectory.csv");
    CHECK(csv.rfind("t,x,xdot,p,energy\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 102);
  }
  SUBCASE("so3 casimir is conserved") {
    const Result r = run("simulate", "so3.json", fresh_dir("so3sim"));
    REQUIRE(r.code == 0);
    bool found = false;
    const json rep = r.report();
    for (const auto& d : rep["drift"]) {
      if (d["quantity"] == "casimir") {
        found = true;
        CHECK(d["max_drift"].get<double>() < 1e-8);
      }
    }
    CHECK(found);
  }
  SUBCASE("json output") {
    const fs::path dir = fresh_dir("freejson");
    const Result r = run("simulate", "free_particle.json", dir, {"--format", "json"});
    REQUIRE(r.code == 0);
    const json traj = json::parse(slurp(dir / "trajectory.json"));
    CHECK(traj["columns"][0] == "t");
    CHECK(traj["rows"].size() == 101);
  }
  SUBCASE("runs are deterministic") {
    const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
    REQUIRE(run("simulate", "so3.json", a).code == 0);
    REQUIRE(run("simulate", "so3.json", b).code == 0);
    CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
  }
}

TEST_CASE("plateau and residual commands") {
  SUBCASE("affine boundary") {
    const fs::path dir = fresh_dir("affine");
    const Result r = run("plateau", "plateau_affine.json", dir);
    REQUIRE(r.code == 0);
    CHECK(r.report()["iterations"].get<int>() <= 2);
    CHECK(fs::exists(dir / "surface.csv"));
    CHECK(fs::exists(dir / "convergence.csv"));
  }
  SUBCASE("Scherk boundary") {
    const Result r = run("plateau", "plateau_scherk.json", fresh_dir("scherk"));
    REQUIRE(r.code == 0);
    const json rep = r.report();
    CHECK(rep["runtime_seconds"].get<double>() < 10.0);
    CHECK((*check_named(rep, "interior_error_vs_exact"))["value"].get<double>() < 1e-3);
  }
  SUBCASE("string residual") {
    const fs::path dir = fresh_dir("resid");
    const Result r = run("residual", "string_scherk.json", dir);
    REQUIRE(r.code == 0);
    const std::string csv = slurp(dir / "residual.csv");
    CHECK(csv.rfind("t,s,r1,r2,r3\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 63 * 63);
  }
  SUBCASE("surface from CSV") {
    CHECK(run("residual", "string_csv.json", fresh_dir("csv")).code == 0);
  }
}

TEST_CASE("check command") {
  CHECK(run("check", "so3_check.json", fresh_dir("chk")).code == 0);
  const Result bad = run("check", "so3_perturbed.json", fresh_dir("chk_bad"));
  CHECK(bad.code == 1);
  const json rep = bad.report();
  CHECK((*check_named(rep, "jacobi"))["value"].get<double>() == doctest::Approx(0.1));
  CHECK(run("check", "homogeneity_counterexample.json", fresh_dir("chk_h")).code == 1);
  CHECK(run("check", "string_scherk.json", fresh_dir("chk_s")).code == 0);
}

TEST_CASE("configuration errors exit with code 2") {
  SUBCASE("malformed expression reports its location") {
    const Result r = run("derive", "malformed.json", fresh_dir("malformed"));
    CHECK(r.code == 2);
    CHECK(r.err.find("line 1, column") != std::string::npos);
  }
  SUBCASE("non-positive step writes nothing") {
    const fs::path dir = fresh_dir("bad_dt");
    CHECK(run("simulate", "javelin_bad_dt.json", dir).code == 2);
    CHECK_FALSE(fs::exists(dir));
  }
  SUBCASE("unknown key") {
    const fs::path cfg = fs::temp_directory_path() / "gradmech_cli_unknown.json";
    std::ofstream(cfg) << R"({"kind": "first_order", "lagrangian": {"expression": "xdot^2/2"}, "bogus": 1})";
    CHECK(run({"simulate", "--config", cfg.string()}).code == 2);
  }
  SUBCASE("missing file and bad arguments") {
    CHECK(run({"derive", "--config", "/nonexistent/file.json"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"derive"}).code == 2);
    CHECK(run("simulate", "free_particle.json", fresh_dir("fmt"), {"--format", "xml"}).code == 2);
  }
  SUBCASE("kind does not support the command") {
    CHECK(run("plateau", "javelin.json", fresh_dir("kind")).code == 2);
  }
}

}  // TEST_SUITE
