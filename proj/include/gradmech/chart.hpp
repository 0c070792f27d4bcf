#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradmech/expr.hpp"

namespace gradmech {

/// How d/dt acts on a jet coordinate of order i.
enum class Prolongation {
  kQJet,     // d/dt q_i = q_{i+1}
  kYGraded,  // d/dt y_i = (i+1) y_{i+1}
};

/// A coordinate of a jet chart. Coordinates of one `family` and `component`
/// form a prolongation chain ordered by `order`.
struct JetVar {
  std::string name;
  std::string family;
  int component = 1;
  int order = 0;
  int weight = 0;
};

class Chart {
 public:
  Chart() = default;
  Chart(std::vector<JetVar> vars, Prolongation rule);

  /// Chart of variables carrying only weights; no variable has a time derivative.
  static Chart weighted(const std::vector<std::pair<std::string, int>>& weights);
  /// q_0..q_depth (one component) or q{A}_0..q{A}_depth, weights equal to the order.
  static Chart qjet(const std::string& base, int components, int depth);

  Prolongation rule() const { return rule_; }
  const std::vector<JetVar>& vars() const { return vars_; }
  std::vector<std::string> names() const;

  const JetVar* find(const std::string& name) const;
  const JetVar& at(const std::string& name) const;  // throws ChartError
  bool contains(const std::string& name) const { return find(name) != nullptr; }
  const JetVar* successor(const JetVar& v) const;
  const JetVar* lookup(const std::string& family, int component, int order) const;

  /// Overrides d/dt of a coordinate, e.g. an anchored base coordinate.
  void set_rate(const std::string& name, Expr rate);
  /// d/dt of a coordinate under the chart's prolongation rule. Throws
  /// ChartError when the chain has no higher coordinate.
  Expr rate(const JetVar& v) const;

  /// Throws ChartError naming the first variable of `e` that the chart lacks.
  void validate(const Expr& e) const;

  /// Renders a coordinate for LaTeX output.
  std::string latex_symbol(const std::string& name) const;

 private:
  std::vector<JetVar> vars_;
  Prolongation rule_ = Prolongation::kQJet;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::map<std::string, Expr, std::less<>> rates_;
};

/// Applies d/dt `order` times by the chain rule.
Expr total_derivative(const Expr& e, const Chart& chart, int order = 1);

struct HomogeneityOptions {
  int points = 100;
  double tolerance = 1e-9;
  double range = 2.0;  // sample coordinates uniformly in [-range, range]
  std::uint64_t seed = 20240601;
};

/// True iff e(h_t p) = t^degree e(p) for t in {0.5, 2, 3} at random points p,
/// where h_t scales every coordinate by t^weight.
bool check_homogeneity(const Expr& e, const Chart& chart, int degree, const HomogeneityOptions& options = {});

}  // namespace gradmech
