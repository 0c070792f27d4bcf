#include "gradmech/chart.hpp"

#include <cctype>
#include <cmath>
#include <random>

#include "gradmech/errors.hpp"
#include "gradmech/program.hpp"

namespace gradmech {

Chart::Chart(std::vector<JetVar> vars, Prolongation rule) : vars_(std::move(vars)), rule_(rule) {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (!index_.emplace(vars_[i].name, i).second) throw ChartError("duplicate chart variable '" + vars_[i].name + "'");
  }
}

Chart Chart::weighted(const std::vector<std::pair<std::string, int>>& weights) {
  std::vector<JetVar> vars;
  int component = 1;
  for (const auto& [name, w] : weights) vars.push_back(JetVar{name, name, component++, 0, w});
  return Chart(std::move(vars), Prolongation::kQJet);
}

Chart Chart::qjet(const std::string& base, int components, int depth) {
  std::vector<JetVar> vars;
  for (int a = 1; a <= components; ++a) {
    for (int i = 0; i <= depth; ++i) {
      std::string name = components == 1 ? base + "_" + std::to_string(i)
                                         : base + std::to_string(a) + "_" + std::to_string(i);
      vars.push_back(JetVar{std::move(name), base, a, i, i});
    }
  }
  return Chart(std::move(vars), Prolongation::kQJet);
}

std::vector<std::string> Chart::names() const {
  std::vector<std::string> out;
  out.reserve(vars_.size());
  for (const auto& v : vars_) out.push_back(v.name);
  return out;
}

const JetVar* Chart::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &vars_[it->second];
}

const JetVar& Chart::at(const std::string& name) const {
  if (const JetVar* v = find(name)) return *v;
  throw ChartError("variable '" + name + "' is not in the chart");
}

const JetVar* Chart::lookup(const std::string& family, int component, int order) const {
  for (const auto& v : vars_) {
    if (v.family == family && v.component == component && v.order == order) return &v;
  }
  return nullptr;
}

const JetVar* Chart::successor(const JetVar& v) const { return lookup(v.family, v.component, v.order + 1); }

void Chart::set_rate(const std::string& name, Expr rate) {
  at(name);
  rates_[name] = std::move(rate);
}

Expr Chart::rate(const JetVar& v) const {
  if (auto it = rates_.find(v.name); it != rates_.end()) return it->second;
  const JetVar* next = successor(v);
  if (next == nullptr) throw ChartError("chart too shallow: no jet coordinate above '" + v.name + "'");
  const double factor = rule_ == Prolongation::kYGraded ? static_cast<double>(v.order + 1) : 1.0;
  return Expr(factor) * Expr::var(next->name);
}

void Chart::validate(const Expr& e) const {
  for (const auto& name : free_variables(e)) {
    if (!contains(name)) throw ChartError("variable '" + name + "' is not in the chart");
  }
}

std::string Chart::latex_symbol(const std::string& name) const {
  const JetVar* v = find(name);
  if (v == nullptr) return name;
  // Split "y2_3" style names into symbol, component and order.
  std::string head = name;
  std::string sub;
  if (auto us = name.find('_'); us != std::string::npos) {
    head = name.substr(0, us);
    sub = name.substr(us + 1);
  }
  std::string letters = head;
  std::string digits;
  while (!letters.empty() && std::isdigit(static_cast<unsigned char>(letters.back()))) {
    digits.insert(digits.begin(), letters.back());
    letters.pop_back();
  }
  if (letters.size() > 1) letters = "\\" + letters;
  if (letters == "\\xd") letters = "\\dot{x}";
  if (letters == "\\xdot") letters = "\\dot{x}";
  if (letters == "\\xddot") letters = "\\ddot{x}";
  if (letters == "\\pdot") letters = "\\dot{p}";
  std::string out = letters;
  if (!digits.empty()) out += "^{" + digits + "}";
  if (!sub.empty()) out += "_{" + sub + "}";
  return out;
}

Expr total_derivative(const Expr& e, const Chart& chart, int order) {
  if (order < 0) throw InvalidArgument("total_derivative: negative order");
  Expr out = e;
  for (int step = 0; step < order; ++step) {
    Expr sum(0.0);
    for (const auto& name : free_variables(out)) {
      const JetVar& v = chart.at(name);
      Expr partial = diff(out, name);
      if (partial.is_const(0.0)) continue;
      sum = sum + partial * chart.rate(v);
    }
    out = sum;
  }
  return out;
}

bool check_homogeneity(const Expr& e, const Chart& chart, int degree, const HomogeneityOptions& options) {
  chart.validate(e);
  const auto vars = free_variables(e);
  std::vector<std::string> slots(vars.begin(), vars.end());
  std::vector<double> weights;
  for (const auto& name : slots) weights.push_back(chart.at(name).weight);
  const Program program({e}, slots);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> coord(-options.range, options.range);
  std::vector<double> p(slots.size());
  std::vector<double> scaled(slots.size());
  int checked = 0;
  for (int attempt = 0; attempt < options.points * 20 && checked < options.points; ++attempt) {
    for (auto& x : p) x = coord(rng);
    double base = 0.0;
    try {
      base = program(p)[0];
    } catch (const EvalError&) {
      continue;
    }
    bool evaluated = true;
    for (double t : {0.5, 2.0, 3.0}) {
      for (std::size_t i = 0; i < p.size(); ++i) scaled[i] = p[i] * std::pow(t, weights[i]);
      double value = 0.0;
      try {
        value = program(scaled)[0];
      } catch (const EvalError&) {
        evaluated = false;
        break;
      }
      const double expected = std::pow(t, degree) * base;
      if (std::fabs(value - expected) > options.tolerance * std::max(std::fabs(value), std::fabs(expected))) {
        if (!(value == expected)) return false;
      }
    }
    if (evaluated) ++checked;
  }
  return checked > 0;
}

}  // namespace gradmech
