#include "gradmech/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradmech/higher.hpp"
#include "gradmech/report.hpp"
#include "gradmech/tulczyjew.hpp"

namespace gradmech::cli {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing helpers

void allow_keys(const json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": expected a finite number");
  return v;
}

long long integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<long long>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  return j.get<std::string>();
}

Expr expression(const json& j, const std::string& where) {
  const std::string source = text(j, where);
  try {
    return parse(source);
  } catch (const ParseError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void require_subset(const Expr& e, const std::vector<std::string>& allowed, const std::string& where) {
  for (const auto& name : free_variables(e)) {
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      throw ConfigError(where + ": variable '" + name + "' is not allowed here");
    }
  }
}

Bindings bindings(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object of name: value pairs");
  Bindings out;
  for (const auto& [key, value] : j.items()) out[key] = number(value, where + "." + key);
  return out;
}

Tensor3 tensor(const json& j, int n, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) throw ConfigError(where + ": expected " + std::to_string(n) + " blocks");
  Tensor3 t(n, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)));
  for (int c = 0; c < n; ++c) {
    if (!j[c].is_array() || static_cast<int>(j[c].size()) != n) throw ConfigError(where + ": wrong row count");
    for (int a = 0; a < n; ++a) {
      if (!j[c][a].is_array() || static_cast<int>(j[c][a].size()) != n) throw ConfigError(where + ": wrong column count");
      for (int b = 0; b < n; ++b) t[c][a][b] = number(j[c][a][b], where);
    }
  }
  return t;
}

AlgebroidSpec parse_algebroid(const json& j) {
  const std::string where = "algebroid";
  const std::string type = text(require(j, "type", where), where + ".type");
  auto apply_overrides = [&](Tensor3 t) {
    if (!j.contains("overrides")) return t;
    const json& list = j.at("overrides");
    if (!list.is_array()) throw ConfigError(where + ".overrides: expected an array");
    const int n = static_cast<int>(t.size());
    for (const auto& item : list) {
      allow_keys(item, {"c", "a", "b", "value"}, where + ".overrides");
      const auto c = integer(require(item, "c", where + ".overrides"), where + ".overrides.c");
      const auto a = integer(require(item, "a", where + ".overrides"), where + ".overrides.a");
      const auto b = integer(require(item, "b", where + ".overrides"), where + ".overrides.b");
      if (c < 1 || c > n || a < 1 || a > n || b < 1 || b > n) throw ConfigError(where + ".overrides: index out of range");
      t[c - 1][a - 1][b - 1] = number(require(item, "value", where + ".overrides"), where + ".overrides.value");
    }
    return t;
  };
  if (type == "tangent") {
    allow_keys(j, {"type", "dim"}, where);
    const auto m = integer(require(j, "dim", where), where + ".dim");
    if (m < 1 || m > 16) throw ConfigError(where + ".dim: must be between 1 and 16");
    return tangent_algebroid(static_cast<int>(m));
  }
  if (type == "so3" || type == "abelian" || type == "lie_algebra") {
    Tensor3 c;
    if (type == "so3") {
      allow_keys(j, {"type", "overrides"}, where);
      c = so3_constants();
    } else if (type == "abelian") {
      allow_keys(j, {"type", "rank", "overrides"}, where);
      const auto n = integer(require(j, "rank", where), where + ".rank");
      if (n < 1 || n > 16) throw ConfigError(where + ".rank: must be between 1 and 16");
      c = Tensor3(n, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)));
    } else {
      allow_keys(j, {"type", "constants", "overrides"}, where);
      const json& cj = require(j, "constants", where);
      if (!cj.is_array() || cj.empty()) throw ConfigError(where + ".constants: expected a nonempty array");
      c = tensor(cj, static_cast<int>(cj.size()), where + ".constants");
    }
    const bool modified = j.contains("overrides");
    AlgebroidSpec spec = lie_algebra_unchecked(apply_overrides(std::move(c)));
    spec.name = modified ? type + "_modified" : type;
    return spec;
  }
  if (type == "custom") {
    allow_keys(j, {"type", "base_dim", "rank", "anchor", "structure"}, where);
    const auto m = integer(require(j, "base_dim", where), where + ".base_dim");
    const auto n = integer(require(j, "rank", where), where + ".rank");
    if (m < 0 || m > 16 || n < 1 || n > 16) throw ConfigError(where + ": dimensions out of range");
    std::vector<std::vector<Expr>> anchor(m, std::vector<Expr>(n, Expr(0.0)));
    if (m > 0) {
      const json& aj = require(j, "anchor", where);
      if (!aj.is_array() || static_cast<long long>(aj.size()) != m) throw ConfigError(where + ".anchor: expected base_dim rows");
      for (int A = 0; A < m; ++A) {
        if (!aj[A].is_array() || static_cast<long long>(aj[A].size()) != n) throw ConfigError(where + ".anchor: expected rank columns");
        for (int a = 0; a < n; ++a) anchor[A][a] = expression(aj[A][a], where + ".anchor");
      }
    }
    std::vector<std::vector<std::vector<Expr>>> structure(
        n, std::vector<std::vector<Expr>>(n, std::vector<Expr>(n, Expr(0.0))));
    const json& sj = require(j, "structure", where);
    if (!sj.is_array() || static_cast<long long>(sj.size()) != n) throw ConfigError(where + ".structure: expected rank blocks");
    for (int c = 0; c < n; ++c) {
      if (!sj[c].is_array() || static_cast<long long>(sj[c].size()) != n) throw ConfigError(where + ".structure: wrong row count");
      for (int a = 0; a < n; ++a) {
        if (!sj[c][a].is_array() || static_cast<long long>(sj[c][a].size()) != n) throw ConfigError(where + ".structure: wrong column count");
        for (int b = 0; b < n; ++b) structure[c][a][b] = expression(sj[c][a][b], where + ".structure");
      }
    }
    try {
      return make_algebroid("custom", static_cast<int>(m), static_cast<int>(n), std::move(anchor), std::move(structure));
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  throw ConfigError(where + ".type: unknown algebroid type '" + type + "'");
}

std::vector<std::string> first_order_variables(int m, bool hamiltonian) {
  const FirstOrderNames n = first_order_names(m);
  std::vector<std::string> out = n.x;
  const auto& second = hamiltonian ? n.p : n.xdot;
  out.insert(out.end(), second.begin(), second.end());
  return out;
}

std::vector<std::string> g2_variables(int rank) {
  std::vector<std::string> out;
  for (int a = 1; a <= rank; ++a) {
    out.push_back(g2_name(rank, a, 0));
    out.push_back(g2_name(rank, a, 1));
  }
  return out;
}

void parse_numeric(const json& j, ProblemConfig& cfg) {
  const std::string where = "numeric";
  allow_keys(j, {"T", "dt", "tolerance", "drift_tolerance", "samples", "seed", "stride", "initial_jets", "initial_state",
                 "grid", "domain", "max_iter", "error_tolerance"},
             where);
  if (j.contains("T")) cfg.T = number(j["T"], where + ".T");
  if (j.contains("dt")) cfg.dt = number(j["dt"], where + ".dt");
  if (!(cfg.T > 0.0)) throw ConfigError(where + ".T: must be positive");
  if (!(cfg.dt > 0.0)) throw ConfigError(where + ".dt: must be positive");
  if (cfg.dt > cfg.T) throw ConfigError(where + ".dt: must not exceed T");
  if (cfg.T / cfg.dt > 1e8) throw ConfigError(where + ": T/dt exceeds 1e8 steps");
  if (j.contains("tolerance")) cfg.tolerance = number(j["tolerance"], where + ".tolerance");
  if (j.contains("drift_tolerance")) cfg.drift_tolerance = number(j["drift_tolerance"], where + ".drift_tolerance");
  if (j.contains("error_tolerance")) cfg.error_tolerance = number(j["error_tolerance"], where + ".error_tolerance");
  if (!(cfg.tolerance > 0.0) || !(cfg.drift_tolerance > 0.0) || !(cfg.error_tolerance > 0.0)) {
    throw ConfigError(where + ": tolerances must be positive");
  }
  if (j.contains("samples")) {
    const auto s = integer(j["samples"], where + ".samples");
    if (s < 1 || s > 1000000) throw ConfigError(where + ".samples: out of range");
    cfg.samples = static_cast<int>(s);
  }
  if (j.contains("seed")) {
    const auto s = integer(j["seed"], where + ".seed");
    if (s < 0) throw ConfigError(where + ".seed: must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (j.contains("stride")) {
    const auto s = integer(j["stride"], where + ".stride");
    if (s < 1) throw ConfigError(where + ".stride: must be positive");
    cfg.stride = static_cast<std::size_t>(s);
  }
  if (j.contains("initial_jets")) cfg.initial_jets = bindings(j["initial_jets"], where + ".initial_jets");
  if (j.contains("initial_state")) cfg.initial_state = bindings(j["initial_state"], where + ".initial_state");
  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (!g.is_array() || g.size() != 2) throw ConfigError(where + ".grid: expected [nx, ny]");
    const auto nx = integer(g[0], where + ".grid");
    const auto ny = integer(g[1], where + ".grid");
    if (nx < 5 || ny < 5 || nx > 2049 || ny > 2049) throw ConfigError(where + ".grid: sizes must be between 5 and 2049");
    cfg.nx = static_cast<std::size_t>(nx);
    cfg.ny = static_cast<std::size_t>(ny);
  }
  if (j.contains("domain")) {
    const json& d = j["domain"];
    if (!d.is_array() || d.size() != 4) throw ConfigError(where + ".domain: expected [a, b, c, d]");
    for (int i = 0; i < 4; ++i) cfg.domain[i] = number(d[i], where + ".domain");
    if (!(cfg.domain[0] < cfg.domain[1]) || !(cfg.domain[2] < cfg.domain[3])) {
      throw ConfigError(where + ".domain: need a < b and c < d");
    }
  }
  if (j.contains("max_iter")) {
    const auto m = integer(j["max_iter"], where + ".max_iter");
    if (m < 1 || m > 10000) throw ConfigError(where + ".max_iter: out of range");
    cfg.max_iter = static_cast<int>(m);
  }
}

HomogeneityItem parse_homogeneity(const json& j, std::size_t index) {
  const std::string where = "homogeneity[" + std::to_string(index) + "]";
  allow_keys(j, {"label", "expression", "weights", "degree", "dimension"}, where);
  HomogeneityItem item;
  item.label = j.contains("label") ? text(j["label"], where + ".label") : "item " + std::to_string(index);
  item.degree = static_cast<int>(integer(require(j, "degree", where), where + ".degree"));
  const std::string source = text(require(j, "expression", where), where + ".expression");
  if (source == "area") {
    const auto m = j.contains("dimension") ? integer(j["dimension"], where + ".dimension") : 3;
    if (m < 2 || m > 16) throw ConfigError(where + ".dimension: must be between 2 and 16");
    item.expression = area_lagrangian(static_cast<int>(m)).L;
    std::vector<std::pair<std::string, int>> weights;
    for (int s = 1; s <= m; ++s) weights.emplace_back(position_name(s), 0);
    for (auto [mu, nu] : bivector_pairs(static_cast<int>(m))) weights.emplace_back(bivector_name(mu, nu), 1);
    item.chart = Chart::weighted(weights);
    if (j.contains("weights")) throw ConfigError(where + ": the area Lagrangian carries its own weights");
    return item;
  }
  item.expression = expression(j["expression"], where + ".expression");
  const json& wj = require(j, "weights", where);
  if (!wj.is_object()) throw ConfigError(where + ".weights: expected an object");
  std::vector<std::pair<std::string, int>> weights;
  for (const auto& [name, w] : wj.items()) {
    const auto v = integer(w, where + ".weights." + name);
    if (v < 0) throw ConfigError(where + ".weights: weights must be non-negative");
    weights.emplace_back(name, static_cast<int>(v));
  }
  item.chart = Chart::weighted(weights);
  for (const auto& name : free_variables(item.expression)) {
    if (!item.chart.contains(name)) throw ConfigError(where + ": variable '" + name + "' has no weight");
  }
  return item;
}

SurfaceGrid parse_surface(const json& j, const std::filesystem::path& base_dir) {
  const std::string where = "surface";
  if (j.contains("path")) {
    allow_keys(j, {"path"}, where);
    std::filesystem::path p = text(j["path"], where + ".path");
    if (p.is_relative()) p = base_dir / p;
    std::ifstream in(p);
    if (!in) throw ConfigError(where + ".path: cannot open '" + p.string() + "'");
    try {
      if (p.extension() == ".json") {
        std::stringstream buffer;
        buffer << in.rdbuf();
        return surface_from_json(buffer.str());
      }
      return read_surface_csv(in);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  allow_keys(j, {"expressions", "grid", "domain"}, where);
  const json& ej = require(j, "expressions", where);
  if (!ej.is_array() || ej.size() < 2) throw ConfigError(where + ".expressions: expected at least two components");
  std::vector<Expr> comps;
  for (const auto& e : ej) {
    comps.push_back(expression(e, where + ".expressions"));
    require_subset(comps.back(), {"t", "s"}, where + ".expressions");
  }
  const json& g = require(j, "grid", where);
  const json& d = require(j, "domain", where);
  if (!g.is_array() || g.size() != 2) throw ConfigError(where + ".grid: expected [nt, ns]");
  if (!d.is_array() || d.size() != 4) throw ConfigError(where + ".domain: expected [t0, t1, s0, s1]");
  const auto nt = integer(g[0], where + ".grid");
  const auto ns = integer(g[1], where + ".grid");
  if (nt < 5 || ns < 5 || nt > 2049 || ns > 2049) throw ConfigError(where + ".grid: sizes must be between 5 and 2049");
  std::array<double, 4> dom{};
  for (int i = 0; i < 4; ++i) dom[i] = number(d[i], where + ".domain");
  if (!(dom[0] < dom[1]) || !(dom[2] < dom[3])) throw ConfigError(where + ".domain: need t0 < t1 and s0 < s1");
  try {
    SurfaceGrid S = sample_surface(comps, "t", "s", dom[0], dom[1], static_cast<std::size_t>(nt), dom[2], dom[3],
                                   static_cast<std::size_t>(ns));
    S.validate();
    return S;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

const std::set<std::string> kKinds{"first_order", "higher", "lie_algebra", "g2", "string_residual", "plateau"};

}  // namespace

ProblemConfig parse_config(const std::string& source, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  allow_keys(j, {"kind", "algebroid", "dimension", "lagrangian", "hamiltonian", "convention", "numeric", "boundary",
                 "surface", "homogeneity", "reference", "io", "description"},
             "config");
  ProblemConfig cfg;
  cfg.base_dir = base_dir;
  cfg.kind = text(require(j, "kind", "config"), "kind");
  if (!kKinds.count(cfg.kind)) throw ConfigError("kind: unknown problem kind '" + cfg.kind + "'");

  if (j.contains("numeric")) parse_numeric(j["numeric"], cfg);
  if (j.contains("algebroid")) cfg.algebroid = parse_algebroid(j["algebroid"]);
  if (j.contains("dimension")) {
    const auto m = integer(j["dimension"], "dimension");
    if (m < 1 || m > 16) throw ConfigError("dimension: must be between 1 and 16");
    cfg.dimension = static_cast<int>(m);
  }
  if (j.contains("convention")) {
    const std::string c = text(j["convention"], "convention");
    if (c != "right" && c != "left") throw ConfigError("convention: expected 'right' or 'left'");
    cfg.left_convention = c == "left";
  }
  std::string lagrangian_text;
  if (j.contains("lagrangian")) {
    const json& lj = j["lagrangian"];
    allow_keys(lj, {"order", "expression"}, "lagrangian");
    if (lj.contains("order")) {
      const auto k = integer(lj["order"], "lagrangian.order");
      if (k < 1 || k > 6) throw ConfigError("lagrangian.order: must be between 1 and 6");
      cfg.order = static_cast<int>(k);
    }
    lagrangian_text = text(require(lj, "expression", "lagrangian"), "lagrangian.expression");
    if (lagrangian_text != "area") cfg.lagrangian = expression(lj["expression"], "lagrangian.expression");
  }
  if (j.contains("hamiltonian")) {
    const json& hj = j["hamiltonian"];
    allow_keys(hj, {"expression"}, "hamiltonian");
    cfg.hamiltonian = expression(require(hj, "expression", "hamiltonian"), "hamiltonian.expression");
  }
  if (j.contains("boundary")) {
    const json& bj = j["boundary"];
    allow_keys(bj, {"expression", "exact"}, "boundary");
    cfg.boundary = expression(require(bj, "expression", "boundary"), "boundary.expression");
    require_subset(*cfg.boundary, {"x", "y"}, "boundary.expression");
    if (bj.contains("exact")) {
      cfg.exact = expression(bj["exact"], "boundary.exact");
      require_subset(*cfg.exact, {"x", "y"}, "boundary.exact");
    }
  }
  if (j.contains("surface")) cfg.surface = parse_surface(j["surface"], base_dir);
  if (j.contains("homogeneity")) {
    const json& hj = j["homogeneity"];
    if (!hj.is_array()) throw ConfigError("homogeneity: expected an array");
    for (std::size_t i = 0; i < hj.size(); ++i) cfg.homogeneity.push_back(parse_homogeneity(hj[i], i));
  }
  if (j.contains("reference")) {
    const json& rj = j["reference"];
    allow_keys(rj, {"base_coefficient", "label"}, "reference");
    cfg.reference_coefficient = number(require(rj, "base_coefficient", "reference"), "reference.base_coefficient");
  }
  if (j.contains("io")) {
    const json& ij = j["io"];
    allow_keys(ij, {"out", "format"}, "io");
    if (ij.contains("out")) {
      std::filesystem::path p = text(ij["out"], "io.out");
      if (p.is_relative()) p = base_dir / p;
      cfg.out_dir = p.string();
    }
    if (ij.contains("format")) cfg.format = text(ij["format"], "io.format");
  }
  if (cfg.format != "csv" && cfg.format != "json") throw ConfigError("io.format: expected 'csv' or 'json'");

  // Kind-specific requirements.
  const std::string& kind = cfg.kind;
  if (kind == "first_order") {
    if (!cfg.lagrangian && !cfg.hamiltonian) throw ConfigError("first_order: needs a lagrangian or a hamiltonian block");
    if (cfg.lagrangian) {
      if (cfg.order != 1) throw ConfigError("lagrangian.order: first_order problems have order 1");
      require_subset(*cfg.lagrangian, first_order_variables(cfg.dimension, false), "lagrangian.expression");
    }
    if (cfg.hamiltonian) require_subset(*cfg.hamiltonian, first_order_variables(cfg.dimension, true), "hamiltonian.expression");
    const auto chart_names = first_order_chart(cfg.dimension).names();
    for (const auto& [name, v] : cfg.initial_jets) {
      if (std::find(chart_names.begin(), chart_names.end(), name) == chart_names.end()) {
        throw ConfigError("numeric.initial_jets: '" + name + "' is not a coordinate of the first-order chart");
      }
    }
    const auto hv = first_order_variables(cfg.dimension, true);
    for (const auto& [name, v] : cfg.initial_state) {
      if (std::find(hv.begin(), hv.end(), name) == hv.end()) {
        throw ConfigError("numeric.initial_state: '" + name + "' is not a phase-space coordinate");
      }
    }
  } else if (kind == "higher" || kind == "lie_algebra") {
    if (!cfg.algebroid) throw ConfigError(kind + ": needs an algebroid block");
    if (!cfg.lagrangian) throw ConfigError(kind + ": needs a lagrangian block with an expression");
    if (kind == "lie_algebra" && cfg.algebroid->base_dim != 0) throw ConfigError("lie_algebra: the algebroid must have no base");
    try {
      const LagrangianSpec spec(*cfg.algebroid, cfg.order, *cfg.lagrangian);
      const auto names = spec.chart(2 * cfg.order).names();
      for (const auto& [name, v] : cfg.initial_jets) {
        if (std::find(names.begin(), names.end(), name) == names.end()) {
          throw ConfigError("numeric.initial_jets: '" + name + "' is not a jet coordinate");
        }
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("lagrangian: " + std::string(e.what()));
    }
    if (!cfg.initial_state.empty()) throw ConfigError("numeric.initial_state: use initial_jets for this kind");
  } else if (kind == "g2") {
    if (!cfg.algebroid || cfg.algebroid->base_dim != 0) throw ConfigError("g2: needs a Lie algebra block");
    if (!cfg.lagrangian) throw ConfigError("g2: needs a lagrangian block with an expression");
    require_subset(*cfg.lagrangian, g2_variables(cfg.algebroid->rank), "lagrangian.expression");
  } else if (kind == "plateau") {
    if (!cfg.boundary) throw ConfigError("plateau: needs a boundary block");
  } else if (kind == "string_residual") {
    if (!cfg.surface) throw ConfigError("string_residual: needs a surface block");
    const int m = cfg.surface->m;
    try {
      if (lagrangian_text.empty() || lagrangian_text == "area") {
        cfg.string_lagrangian = area_lagrangian(m);
      } else {
        cfg.string_lagrangian = BivectorLagrangian(m, *cfg.lagrangian);
      }
    } catch (const Error& e) {
      throw ConfigError("lagrangian: " + std::string(e.what()));
    }
  }
  return cfg;
}

ProblemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

namespace {

// ---------------------------------------------------------------------------
// Commands

struct Context {
  const ProblemConfig& cfg;
  std::uint64_t seed;
  std::filesystem::path out_dir;
  std::string format;
  json report;
  bool failed = false;
  std::vector<std::pair<std::string, std::vector<std::string>>> latex;

  void write_file(const std::string& name, const std::string& content) {
    std::filesystem::create_directories(out_dir);
    const auto path = out_dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path.string() + "'");
    f << content;
    report["files"].push_back(path.string());
  }

  /// Records a tested number together with its tolerance.
  void check(const std::string& name, double value, double tolerance, bool passed) {
    report["checks"].push_back({{"name", name}, {"value", value}, {"tolerance", tolerance}, {"passed", passed}});
    if (!passed) failed = true;
  }
};

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

void add_section(Context& ctx, const std::string& title, const std::vector<std::string>& text,
                 const std::vector<std::string>& latex) {
  ctx.report["equations"].push_back({{"section", title}, {"text", text}, {"latex", latex}});
  ctx.latex.emplace_back(title, latex);
}

void cmd_check(Context& ctx) {
  const ProblemConfig& cfg = ctx.cfg;
  if (!cfg.algebroid && cfg.homogeneity.empty()) throw ConfigError("check: needs an algebroid or a homogeneity block");
  if (cfg.algebroid) {
    AxiomOptions opts;
    opts.samples = std::min(cfg.samples, 200);
    opts.seed = ctx.seed;
    const AxiomReport r = check_axioms(*cfg.algebroid, opts);
    const double tol = cfg.tolerance;
    ctx.report["axioms"] = {{"algebroid", cfg.algebroid->name},
                            {"antisymmetry_max_violation", r.antisymmetry_max_violation},
                            {"jacobi_max_violation", r.jacobi_max_violation},
                            {"anchor_compat_max_violation", r.anchor_compat_max_violation},
                            {"samples", r.sample_points.size()},
                            {"tolerance", tol},
                            {"passed", r.passed(tol)}};
    ctx.check("antisymmetry", r.antisymmetry_max_violation, tol, r.antisymmetry_max_violation < tol);
    ctx.check("jacobi", r.jacobi_max_violation, tol, r.jacobi_max_violation < tol);
    ctx.check("anchor_compat", r.anchor_compat_max_violation, tol, r.anchor_compat_max_violation < tol);
  }
  for (const auto& h : cfg.homogeneity) {
    HomogeneityOptions opts;
    opts.seed = ctx.seed;
    const bool ok = check_homogeneity(h.expression, h.chart, h.degree, opts);
    ctx.report["homogeneity"].push_back({{"label", h.label},
                                         {"expression", to_string(h.expression)},
                                         {"degree", h.degree},
                                         {"tolerance", opts.tolerance},
                                         {"passed", ok}});
    if (!ok) ctx.failed = true;
  }
}

std::vector<std::string> latex_of(const std::vector<std::pair<std::string, Expr>>& rows, const Chart& chart,
                                  const std::string& sep) {
  auto sym = [&](const std::string& n) { return chart.latex_symbol(n); };
  std::vector<std::string> out;
  for (const auto& [lhs, rhs] : rows) out.push_back(sym(lhs) + sep + to_latex(simplify(rhs), sym));
  return out;
}

std::vector<std::string> text_of(const std::vector<std::pair<std::string, Expr>>& rows) {
  std::vector<std::string> out;
  for (const auto& [lhs, rhs] : rows) out.push_back(lhs + " = " + to_string(simplify(rhs)));
  return out;
}

void derive_first_order(Context& ctx) {
  const ProblemConfig& cfg = ctx.cfg;
  const int m = cfg.dimension;
  const FirstOrderNames n = first_order_names(m);
  const Chart chart = first_order_chart(m);
  if (cfg.lagrangian) {
    const ELSystem sys = lagrangian_dynamics(*cfg.lagrangian, m);
    std::vector<std::pair<std::string, Expr>> rows;
    for (int A = 0; A < m; ++A) rows.emplace_back(n.p[A], diff(*cfg.lagrangian, n.xdot[A]));
    for (int A = 0; A < m; ++A) rows.emplace_back(n.pdot[A], diff(*cfg.lagrangian, n.x[A]));
    add_section(ctx, "Lagrangian phase dynamics", text_of(rows), latex_of(rows, chart, " &= "));
    add_section(ctx, "Euler-Lagrange equations", text_lines(sys), latex_lines(sys));
    ctx.report["system"] = to_json(sys);
  }
  if (cfg.hamiltonian) {
    const ELSystem sys = hamiltonian_dynamics(*cfg.hamiltonian, m);
    std::vector<std::pair<std::string, Expr>> rows;
    for (int A = 0; A < m; ++A) rows.emplace_back(n.xdot[A], diff(*cfg.hamiltonian, n.p[A]));
    for (int A = 0; A < m; ++A) rows.emplace_back(n.pdot[A], -diff(*cfg.hamiltonian, n.x[A]));
    add_section(ctx, "Hamiltonian phase dynamics", text_of(rows), latex_of(rows, chart, " &= "));
    ctx.report["hamiltonian_system"] = to_json(sys);
  }
}

void derive_base_equations(Context& ctx, const LagrangianSpec& spec) {
  const ProblemConfig& cfg = ctx.cfg;
  constexpr double kOracleRelativeTolerance = 1e-3;
  std::vector<std::string> text, latex;
  for (int A = 0; A < spec.algebroid.base_dim; ++A) {
    const BaseEquation be = base_equation(spec, A + 1);
    const std::string x = spec.algebroid.base_names[A];
    const std::string xl = Chart().latex_symbol(x);
    json entry{{"component", A + 1}, {"matches_form", be.matches_form}};
    if (!be.matches_form) {
      ctx.report["base_equations"].push_back(entry);
      continue;
    }
    entry["base_coefficient"] = be.base_coefficient;
    entry["jet_coefficient"] = be.jet_coefficient;
    text.push_back("d^2 " + x + "/dt^2 = " + format_number(be.base_coefficient) + " d^4 " + x + "/dt^4");
    latex.push_back("\\frac{d^2 " + xl + "}{dt^2} &= " + to_latex(Expr(be.base_coefficient)) + "\\,\\frac{d^4 " + xl +
                    "}{dt^4}");
    const OracleFit fit = oracle_base_coefficient(spec, A + 1, 2.5e-3, ctx.seed);
    const double rel = std::fabs(fit.coefficient - be.base_coefficient) / std::fabs(be.base_coefficient);
    entry["oracle"] = {{"coefficient", fit.coefficient},
                       {"relative_residual", fit.relative_residual},
                       {"relative_deviation", rel},
                       {"tolerance", kOracleRelativeTolerance}};
    const double sign = fit.coefficient < 0 ? -1.0 : 1.0;
    ctx.check("oracle_base_coefficient_" + std::to_string(A + 1), rel, kOracleRelativeTolerance,
              rel < kOracleRelativeTolerance);
    if (cfg.reference_coefficient) {
      const double ref = std::fabs(*cfg.reference_coefficient);
      constexpr double kExact = 1e-12;
      entry["reference"] = {
          {"coefficient", *cfg.reference_coefficient},
          {"oracle_sign", sign},
          {"signed_reference", sign * ref},
          {"base_agrees_up_to_sign", std::fabs(std::fabs(be.base_coefficient) - ref) < kExact},
          {"jet_agrees_up_to_sign", std::fabs(std::fabs(be.jet_coefficient) - ref) < kExact},
          {"note", "base coefficient " + format_number(be.base_coefficient) + " (d/dt of x), jet coefficient " +
                       format_number(be.jet_coefficient) + " (d/dt y_1 = c d^2/dt^2 y_2), reference |c| = " +
                       format_number(ref) + ", sign fixed by the discrete-action oracle: " +
                       (sign < 0 ? "negative" : "positive")},
          {"tolerance", kExact}};
    }
    ctx.report["base_equations"].push_back(entry);
  }
  if (!text.empty()) add_section(ctx, "Base equations", text, latex);
}

void derive_higher(Context& ctx) {
  const ProblemConfig& cfg = ctx.cfg;
  const LagrangianSpec spec(*cfg.algebroid, cfg.order, *cfg.lagrangian);
  DeriveOptions opts;
  opts.seed = ctx.seed;
  const ELSystem sys = el_equations(spec, opts);
  const MomentaSet mom = momenta(spec);
  add_section(ctx, "Momenta", text_lines(mom), latex_lines(mom));
  std::vector<std::string> text, latex;
  for (const auto& l : text_lines(sys)) {
    if (l.rfind("0 = ", 0) == 0) text.push_back(l);
  }
  auto sym = [&](const std::string& n) { return sys.chart.latex_symbol(n); };
  for (const auto& r : sys.residuals) latex.push_back("0 &= " + to_latex(simplify(r), sym));
  add_section(ctx, "Euler-Lagrange equations", text, latex);
  ctx.report["system"] = to_json(sys);
  ctx.report["momenta"] = to_json(mom);

  OracleOptions oo;
  oo.samples = cfg.samples;
  oo.seed = ctx.seed;
  if (cfg.algebroid->name == "tangent") {
    const double dev = reduce_check(spec, oo);
    ctx.check("reduce_check", dev, cfg.tolerance, dev < cfg.tolerance);
    if (cfg.order == 2) derive_base_equations(ctx, spec);
  }
  if (sys.explicit_form) {
    const double dev = explicit_consistency(sys, oo);
    ctx.check("explicit_consistency", dev, cfg.tolerance, dev < cfg.tolerance);
  }
  if (cfg.kind == "lie_algebra" && cfg.order == 2) {
    const int n = cfg.algebroid->rank;
    std::map<std::string, Expr, std::less<>> sub;
    for (int a = 1; a <= n; ++a) {
      sub[fibre_name(n, a, 1)] = Expr::var(g2_name(n, a, 0));
      sub[fibre_name(n, a, 2)] = Expr::var(g2_name(n, a, 1)) / Expr(2.0);
    }
    const Expr Lg = substitute(*cfg.lagrangian, sub);
    const ELSystem g2 = g2_pipeline(Lg, *cfg.algebroid, AdStarConvention::kRight);
    std::vector<std::string> gt, gl;
    auto gsym = [&](const std::string& v) { return g2.chart.latex_symbol(v); };
    for (const auto& m : g2.momenta) {
      gt.push_back(m.name + " = " + to_string(simplify(m.value)));
      gl.push_back(gsym(m.name) + " &= " + to_latex(simplify(m.value), gsym));
    }
    for (const auto& r : g2.residuals) {
      gt.push_back("0 = " + to_string(simplify(r)));
      gl.push_back("0 &= " + to_latex(simplify(r), gsym));
    }
    add_section(ctx, "Higher Euler equations", gt, gl);
    const double dev = g2_consistency(Lg, *cfg.algebroid, AdStarConvention::kRight, oo);
    ctx.check("g2_consistency", dev, cfg.tolerance, dev < cfg.tolerance);
  }
}

void derive_g2(Context& ctx) {
  const ProblemConfig& cfg = ctx.cfg;
  const auto conv = cfg.left_convention ? AdStarConvention::kLeft : AdStarConvention::kRight;
  const ELSystem g2 = g2_pipeline(*cfg.lagrangian, *cfg.algebroid, conv);
  add_section(ctx, "Higher Euler equations", text_lines(g2), latex_lines(g2));
  ctx.report["system"] = to_json(g2);
  OracleOptions oo;
  oo.samples = cfg.samples;
  oo.seed = ctx.seed;
  const double dev = g2_consistency(*cfg.lagrangian, *cfg.algebroid, conv, oo);
  ctx.check("g2_consistency", dev, cfg.tolerance, dev < cfg.tolerance);
}

void cmd_derive(Context& ctx) {
  const std::string& kind = ctx.cfg.kind;
  if (kind == "first_order") return derive_first_order(ctx);
  if (kind == "higher" || kind == "lie_algebra") return derive_higher(ctx);
  if (kind == "g2") return derive_g2(ctx);
  throw ConfigError("derive: kind '" + kind + "' has no equations to derive");
}

std::string trajectory_text(const Trajectory& tr, std::size_t stride, const std::string& format) {
  std::vector<std::string> columns{"t"};
  columns.insert(columns.end(), tr.state_names.begin(), tr.state_names.end());
  columns.insert(columns.end(), tr.conserved_names.begin(), tr.conserved_names.end());
  auto keep = [&](std::size_t i) { return i % stride == 0 || i + 1 == tr.time.size(); };
  if (format == "json") {
    json rows = json::array();
    for (std::size_t i = 0; i < tr.time.size(); ++i) {
      if (!keep(i)) continue;
      json row = json::array({tr.time[i]});
      for (double v : tr.states[i]) row.push_back(v);
      if (i < tr.conserved.size()) {
        for (double v : tr.conserved[i]) row.push_back(v);
      }
      rows.push_back(std::move(row));
    }
    return json{{"columns", columns}, {"rows", rows}}.dump() + "\n";
  }
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
  out += "\n";
  for (std::size_t i = 0; i < tr.time.size(); ++i) {
    if (!keep(i)) continue;
    out += csv_number(tr.time[i]);
    for (double v : tr.states[i]) out += "," + csv_number(v);
    if (i < tr.conserved.size()) {
      for (double v : tr.conserved[i]) out += "," + csv_number(v);
    }
    out += "\n";
  }
  return out;
}

void cmd_simulate(Context& ctx) {
  const ProblemConfig& cfg = ctx.cfg;
  ELSystem sys;
  std::vector<double> initial;
  if (cfg.kind == "first_order") {
    if (cfg.lagrangian) {
      sys = lagrangian_dynamics(*cfg.lagrangian, cfg.dimension);
      if (!sys.explicit_form) throw SingularLegendre("the Lagrangian is not regular; no explicit form");
      initial = state_from_jets(sys, cfg.initial_jets);
    } else {
      sys = hamiltonian_dynamics(*cfg.hamiltonian, cfg.dimension);
      initial = state_from_values(sys, cfg.initial_state);
    }
  } else if (cfg.kind == "higher" || cfg.kind == "lie_algebra") {
    DeriveOptions opts;
    opts.seed = ctx.seed;
    sys = el_equations(LagrangianSpec(*cfg.algebroid, cfg.order, *cfg.lagrangian), opts);
    initial = state_from_jets(sys, cfg.initial_jets);
  } else {
    throw ConfigError("simulate: kind '" + cfg.kind + "' has no explicit ODE form");
  }
  const Trajectory tr = simulate(sys, initial, cfg.T, cfg.dt);
  ctx.report["integrator"] = tr.integrator;
  ctx.report["dt"] = tr.dt;
  ctx.report["T"] = cfg.T;
  ctx.report["steps"] = tr.time.size() - 1;
  ctx.report["state"] = tr.state_names;
  json final_state = json::object();
  for (std::size_t i = 0; i < tr.state_names.size(); ++i) final_state[tr.state_names[i]] = tr.states.back()[i];
  ctx.report["final_state"] = final_state;
  ctx.report["drift"] = json::array();
  for (std::size_t q = 0; q < tr.conserved_names.size(); ++q) {
    const double d = tr.drift(q);
    const bool ok = d < cfg.drift_tolerance;
    ctx.report["drift"].push_back(
        {{"quantity", tr.conserved_names[q]}, {"max_drift", d}, {"tolerance", cfg.drift_tolerance}, {"passed", ok}});
    if (!ok) ctx.failed = true;
  }
  ctx.write_file("trajectory." + ctx.format, trajectory_text(tr, cfg.stride, ctx.format));
}

void cmd_plateau(Context& ctx) {
  const ProblemConfig& cfg = ctx.cfg;
  if (cfg.kind != "plateau") throw ConfigError("plateau: config kind must be 'plateau'");
  const auto& d = cfg.domain;
  const GraphSurface boundary = GraphSurface::sample(*cfg.boundary, "x", "y", d[0], d[1], cfg.nx, d[2], d[3], cfg.ny);
  PlateauOptions opts;
  opts.tolerance = cfg.tolerance;
  opts.max_iter = cfg.max_iter;
  ctx.report["grid"] = {cfg.nx, cfg.ny};
  ctx.report["domain"] = d;
  const auto start = std::chrono::steady_clock::now();
  const PlateauResult res = solve_plateau(boundary, opts);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ctx.report["iterations"] = res.iterations;
  ctx.report["final_residual"] = {{"value", res.residual}, {"tolerance", cfg.tolerance}};
  ctx.report["runtime_seconds"] = seconds;
  if (cfg.exact) {
    const GraphSurface exact = GraphSurface::sample(*cfg.exact, "x", "y", d[0], d[1], cfg.nx, d[2], d[3], cfg.ny);
    double err = 0.0;
    for (std::size_t i = 1; i + 1 < cfg.nx; ++i) {
      for (std::size_t j = 1; j + 1 < cfg.ny; ++j) {
        const std::size_t k = exact.grid.index(i, j);
        err = std::max(err, std::fabs(res.surface.z[k] - exact.z[k]));
      }
    }
    ctx.check("interior_error_vs_exact", err, cfg.error_tolerance, err < cfg.error_tolerance);
  }
  std::ostringstream surface;
  if (ctx.format == "json") {
    surface << to_json(res.surface) << "\n";
  } else {
    write_csv(surface, res.surface);
  }
  ctx.write_file("surface." + ctx.format, surface.str());
  std::ostringstream log;
  write_log_csv(log, res.log);
  ctx.write_file("convergence.csv", log.str());
}

void cmd_residual(Context& ctx) {
  const ProblemConfig& cfg = ctx.cfg;
  if (cfg.kind != "string_residual") throw ConfigError("residual: config kind must be 'string_residual'");
  const ResidualField field = el_residual(*cfg.string_lagrangian, *cfg.surface);
  const double max = field.max_interior();
  ctx.report["lagrangian"] = to_string(cfg.string_lagrangian->L);
  ctx.report["grid"] = {field.grid.nx, field.grid.ny};
  ctx.check("max_interior_residual", max, cfg.error_tolerance, max < cfg.error_tolerance);
  const Grid2D& g = field.grid;
  const int m = cfg.surface->m;
  if (ctx.format == "json") {
    json rows = json::array();
    for (std::size_t i = 1; i + 1 < g.nx; ++i) {
      for (std::size_t j = 1; j + 1 < g.ny; ++j) {
        json row = json::array({g.x(i), g.y(j)});
        for (int s = 0; s < m; ++s) row.push_back(field.r[s][g.index(i, j)]);
        rows.push_back(std::move(row));
      }
    }
    std::vector<std::string> columns{"t", "s"};
    for (int s = 1; s <= m; ++s) columns.push_back("r" + std::to_string(s));
    ctx.write_file("residual.json", json{{"columns", columns}, {"rows", rows}}.dump() + "\n");
    return;
  }
  std::string out = "t,s";
  for (int s = 1; s <= m; ++s) out += ",r" + std::to_string(s);
  out += "\n";
  for (std::size_t i = 1; i + 1 < g.nx; ++i) {
    for (std::size_t j = 1; j + 1 < g.ny; ++j) {
      out += csv_number(g.x(i)) + "," + csv_number(g.y(j));
      for (int s = 0; s < m; ++s) out += "," + csv_number(field.r[s][g.index(i, j)]);
      out += "\n";
    }
  }
  ctx.write_file("residual.csv", out);
}

const std::set<std::string> kCommands{"check", "derive", "simulate", "plateau", "residual"};

void validate_command(const std::string& command, const ProblemConfig& cfg) {
  const std::string& k = cfg.kind;
  bool ok = true;
  if (command == "derive") ok = k == "first_order" || k == "higher" || k == "lie_algebra" || k == "g2";
  if (command == "simulate") ok = k == "first_order" || k == "higher" || k == "lie_algebra";
  if (command == "plateau") ok = k == "plateau";
  if (command == "residual") ok = k == "string_residual";
  if (command == "check") ok = cfg.algebroid.has_value() || !cfg.homogeneity.empty();
  if (!ok) throw ConfigError(command + ": not applicable to a config of kind '" + k + "'");
}

}  // namespace

int run_command(const Options& options, std::ostream& out, std::ostream& err) {
  if (!kCommands.count(options.command)) {
    err << "error: unknown command '" << options.command << "'\n";
    return kExitConfig;
  }
  std::optional<ProblemConfig> cfg;
  try {
    cfg = load_config(options.config);
    if (options.format) {
      if (*options.format != "csv" && *options.format != "json") throw ConfigError("--format: expected csv or json");
      cfg->format = *options.format;
    }
    validate_command(options.command, *cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::filesystem::path out_dir = options.out_dir ? *options.out_dir : (cfg->out_dir.empty() ? "." : cfg->out_dir);
  Context ctx{*cfg, options.seed.value_or(cfg->seed), out_dir, cfg->format, json::object(), false, {}};
  ctx.report["command"] = options.command;
  ctx.report["kind"] = cfg->kind;
  ctx.report["seed"] = ctx.seed;
  ctx.report["files"] = json::array();
  ctx.report["checks"] = json::array();
  int code = kExitOk;
  try {
    if (options.command == "check") cmd_check(ctx);
    if (options.command == "derive") cmd_derive(ctx);
    if (options.command == "simulate") cmd_simulate(ctx);
    if (options.command == "plateau") cmd_plateau(ctx);
    if (options.command == "residual") cmd_residual(ctx);
    code = ctx.failed ? kExitFailure : kExitOk;
    ctx.report["status"] = ctx.failed ? "verification_failed" : "ok";
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NoConvergence& e) {
    ctx.report["status"] = "error";
    ctx.report["error"] = e.what();
    ctx.report["iterations"] = e.iterations();
    ctx.report["final_residual"] = e.residual();
    err << "error: " << e.what() << "\n";
    code = kExitFailure;
  } catch (const std::exception& e) {
    ctx.report["status"] = "error";
    ctx.report["error"] = e.what();
    err << "error: " << e.what() << "\n";
    code = kExitFailure;
  }

  if (options.command == "derive" && ctx.report["status"] != "error") {
    std::vector<std::string> text;
    for (const auto& sec : ctx.report["equations"]) {
      text.push_back("# " + sec["section"].get<std::string>());
      for (const auto& l : sec["text"]) text.push_back(l.get<std::string>());
    }
    try {
      ctx.write_file("equations.txt", join_lines(text));
      ctx.write_file("equations.tex", latex_document(ctx.latex));
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitFailure;
    }
  }
  if (options.command != "check") {
    try {
      std::filesystem::create_directories(out_dir);
      std::ofstream f(out_dir / "report.json", std::ios::binary);
      f << ctx.report.dump(2) << "\n";
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitFailure;
    }
  }
  if (options.latex && options.command == "derive" && ctx.report["status"] != "error") {
    out << latex_document(ctx.latex);
  } else {
    out << ctx.report.dump(2) << "\n";
  }
  return code;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"gradmech: variational mechanics on algebroids, graded bundles and strings"};
  app.require_subcommand(1);
  Options options;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string format;
  for (const char* name : {"check", "derive", "simulate", "plateau", "residual"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config, "problem config (JSON)")->required();
    sub->add_option("--seed", seed, "random seed for sampling oracles");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", format, "data format for trajectories and surfaces")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--latex", options.latex, "print equations as a LaTeX document");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    options.command = sub->get_name();
    if (sub->count("--seed")) options.seed = seed;
    if (sub->count("--out")) options.out_dir = out_dir;
    if (sub->count("--format")) options.format = format;
  }
  return run_command(options, out, err);
}

}  // namespace gradmech::cli
