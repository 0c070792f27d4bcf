#pragma once

// Immutable symbolic expressions over named real variables.
//
// Nodes are shared between trees, so an Expr is cheap to copy and the
// derivative of a large expression reuses its children.  Arithmetic through
// the overloaded operators folds constants and applies the 0/1 identities;
// Expr::raw() builds a node verbatim (the parser uses it so that parsing
// preserves structure exactly).

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>

namespace gradmech {

enum class Op : std::uint8_t {
  kConst,
  kVar,
  kNeg,
  kSqrt,
  kSin,
  kCos,
  kExp,
  kLog,
  kAbs,
  kSign,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,  // base^exponent with a constant exponent
};

bool is_unary(Op op);
bool is_binary(Op op);
std::string_view function_name(Op op);  // "sqrt", "sin", ... for function-style unaries

struct Node;

class Expr {
 public:
  Expr();  // the constant 0
  Expr(double value);  // NOLINT(google-explicit-constructor): literals read naturally in formulas
  static Expr var(std::string name);
  static Expr raw(Op op, Expr a);
  static Expr raw(Op op, Expr a, Expr b);
  static Expr raw_pow(Expr base, double exponent);

  Op op() const;
  double value() const;  // constant value, or exponent for kPow
  const std::string& name() const;
  Expr arg() const;  // operand of a unary node, base of kPow, lhs of a binary node
  Expr lhs() const { return arg(); }
  Expr rhs() const;

  bool is_const() const { return op() == Op::kConst; }
  bool is_const(double v) const { return is_const() && value() == v; }
  const Node* id() const { return node_.get(); }

  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<const Node>& node() const { return node_; }

 private:
  std::shared_ptr<const Node> node_;
};

struct Node {
  Op op;
  double value = 0.0;
  std::string name;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

// Folding constructors.
Expr operator-(const Expr& a);
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr pow(const Expr& base, double exponent);
Expr sqrt(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr abs(const Expr& a);
Expr sign(const Expr& a);
Expr apply(Op op, const Expr& a);  // folding unary dispatch

using Bindings = std::map<std::string, double, std::less<>>;

/// Evaluates with IEEE double arithmetic. Throws EvalError for unbound
/// variables and domain violations (log of non-positive, division by zero,
/// sqrt of negative, non-integer power of a negative base).
double eval(const Expr& e, const Bindings& bindings);

/// Exact partial derivative. abs'(0) is taken as 0.
Expr diff(const Expr& e, std::string_view variable);

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& replacements);

/// Replaces every variable-free subtree by its value when it evaluates cleanly.
Expr fold_constants(const Expr& e);

/// Display form: numeric factors of products, quotients and negations are
/// collected into one leading coefficient and like terms of sums merged.
/// Equal in value to `e` up to rounding; meant for reports, not evaluation.
Expr simplify(const Expr& e);

std::set<std::string> free_variables(const Expr& e);
bool depends_on(const Expr& e, std::string_view variable);
std::size_t node_count(const Expr& e);  // distinct shared nodes

bool structurally_equal(const Expr& a, const Expr& b);

/// Infix text in the grammar accepted by parse(); parse(to_string(e)) is
/// structurally equal to e.
std::string to_string(const Expr& e);

/// LaTeX rendering; `symbol` maps variable names to LaTeX (identity if empty).
std::string to_latex(const Expr& e, const std::function<std::string(const std::string&)>& symbol = {});

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

Expr parse(std::string_view source);

}  // namespace gradmech
