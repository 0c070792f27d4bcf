#include "gradmech/expr.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "arith.hpp"
#include "gradmech/errors.hpp"

namespace gradmech {

namespace {

std::shared_ptr<const Node> make_node(Op op, double value, std::string name, std::shared_ptr<const Node> a,
                                      std::shared_ptr<const Node> b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = value;
  n->name = std::move(name);
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

const std::shared_ptr<const Node>& zero_node() {
  static const auto zero = make_node(Op::kConst, 0.0, {}, nullptr, nullptr);
  return zero;
}

// Folds a unary or binary node whose operands are constants, if the result is
// a clean finite number.
bool try_fold(Op op, double a, double b, double param, double& out) {
  if (detail::apply(op, a, b, param, out) != nullptr) return false;
  return std::isfinite(out);
}

}  // namespace

bool is_unary(Op op) {
  switch (op) {
    case Op::kNeg:
    case Op::kSqrt:
    case Op::kSin:
    case Op::kCos:
    case Op::kExp:
    case Op::kLog:
    case Op::kAbs:
    case Op::kSign:
    case Op::kPow: return true;
    default: return false;
  }
}

bool is_binary(Op op) {
  return op == Op::kAdd || op == Op::kSub || op == Op::kMul || op == Op::kDiv;
}

std::string_view function_name(Op op) {
  switch (op) {
    case Op::kSqrt: return "sqrt";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kAbs: return "abs";
    case Op::kSign: return "sign";
    default: return {};
  }
}

Expr::Expr() : node_(zero_node()) {}

Expr::Expr(double value) : node_(value == 0.0 && !std::signbit(value) ? zero_node()
                                                                       : make_node(Op::kConst, value, {}, nullptr, nullptr)) {}

Expr Expr::var(std::string name) { return Expr(make_node(Op::kVar, 0.0, std::move(name), nullptr, nullptr)); }

Expr Expr::raw(Op op, Expr a) {
  if (!is_unary(op) || op == Op::kPow) throw InvalidArgument("Expr::raw: not a unary operation");
  return Expr(make_node(op, 0.0, {}, a.node_, nullptr));
}

Expr Expr::raw(Op op, Expr a, Expr b) {
  if (!is_binary(op)) throw InvalidArgument("Expr::raw: not a binary operation");
  return Expr(make_node(op, 0.0, {}, a.node_, b.node_));
}

Expr Expr::raw_pow(Expr base, double exponent) { return Expr(make_node(Op::kPow, exponent, {}, base.node_, nullptr)); }

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
Expr Expr::arg() const { return Expr(node_->a); }
Expr Expr::rhs() const { return Expr(node_->b); }

// ---------------------------------------------------------------------------
// Folding constructors

Expr apply(Op op, const Expr& a) {
  if (op == Op::kNeg) return -a;
  if (a.is_const()) {
    double out = 0.0;
    if (try_fold(op, a.value(), 0.0, 0.0, out)) return Expr(out);
  }
  return Expr::raw(op, a);
}

Expr operator-(const Expr& a) {
  if (a.is_const()) return Expr(-a.value());
  return Expr::raw(Op::kNeg, a);
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.value() + b.value());
  if (a.is_const(0.0)) return b;
  if (b.is_const(0.0)) return a;
  return Expr::raw(Op::kAdd, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.value() - b.value());
  if (b.is_const(0.0)) return a;
  if (a.is_const(0.0)) return -b;
  return Expr::raw(Op::kSub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.value() * b.value());
  if (a.is_const(0.0) || b.is_const(0.0)) return Expr(0.0);
  if (a.is_const(1.0)) return b;
  if (b.is_const(1.0)) return a;
  if (a.is_const(-1.0)) return -b;
  if (b.is_const(-1.0)) return -a;
  return Expr::raw(Op::kMul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const() && b.value() != 0.0) return Expr(a.value() / b.value());
  if (a.is_const(0.0)) return Expr(0.0);
  if (b.is_const(1.0)) return a;
  return Expr::raw(Op::kDiv, a, b);
}

Expr pow(const Expr& base, double exponent) {
  if (exponent == 0.0) return Expr(1.0);
  if (exponent == 1.0) return base;
  if (base.is_const()) {
    double out = 0.0;
    if (try_fold(Op::kPow, base.value(), 0.0, exponent, out)) return Expr(out);
  }
  return Expr::raw_pow(base, exponent);
}

Expr sqrt(const Expr& a) { return apply(Op::kSqrt, a); }
Expr sin(const Expr& a) { return apply(Op::kSin, a); }
Expr cos(const Expr& a) { return apply(Op::kCos, a); }
Expr exp(const Expr& a) { return apply(Op::kExp, a); }
Expr log(const Expr& a) { return apply(Op::kLog, a); }
Expr abs(const Expr& a) { return apply(Op::kAbs, a); }
Expr sign(const Expr& a) { return apply(Op::kSign, a); }

// ---------------------------------------------------------------------------
// Evaluation

namespace {

class Evaluator {
 public:
  explicit Evaluator(const Bindings& bindings) : bindings_(bindings) {}

  double operator()(const Expr& e) {
    const Node* key = e.id();
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    double out = 0.0;
    switch (e.op()) {
      case Op::kConst: out = e.value(); break;
      case Op::kVar: {
        auto it = bindings_.find(e.name());
        if (it == bindings_.end()) throw EvalError("unbound variable '" + e.name() + "'", e.name());
        out = it->second;
        break;
      }
      default: {
        const double a = (*this)(e.arg());
        const double b = is_binary(e.op()) ? (*this)(e.rhs()) : 0.0;
        if (const char* why = detail::apply(e.op(), a, b, e.value(), out)) throw EvalError(why, to_string(e));
      }
    }
    memo_.emplace(key, out);
    return out;
  }

 private:
  const Bindings& bindings_;
  std::unordered_map<const Node*, double> memo_;
};

}  // namespace

double eval(const Expr& e, const Bindings& bindings) { return Evaluator(bindings)(e); }

// ---------------------------------------------------------------------------
// Differentiation

namespace {

class Differentiator {
 public:
  explicit Differentiator(std::string_view v) : v_(v) {}

  Expr operator()(const Expr& e) {
    if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
    Expr d = compute(e);
    memo_.emplace(e.id(), d);
    return d;
  }

 private:
  Expr compute(const Expr& e) {
    switch (e.op()) {
      case Op::kConst: return Expr(0.0);
      case Op::kVar: return Expr(e.name() == v_ ? 1.0 : 0.0);
      case Op::kSign: return Expr(0.0);
      default: break;
    }
    const Expr a = e.arg();
    const Expr da = (*this)(a);
    switch (e.op()) {
      case Op::kNeg: return -da;
      case Op::kSqrt: return da.is_const(0.0) ? da : da / (Expr(2.0) * e);
      case Op::kSin: return cos(a) * da;
      case Op::kCos: return -(sin(a) * da);
      case Op::kExp: return e * da;
      case Op::kLog: return da / a;
      case Op::kAbs: return sign(a) * da;
      case Op::kPow: {
        if (da.is_const(0.0)) return da;
        const double c = e.value();
        return Expr(c) * pow(a, c - 1.0) * da;
      }
      default: break;
    }
    const Expr b = e.rhs();
    const Expr db = (*this)(b);
    switch (e.op()) {
      case Op::kAdd: return da + db;
      case Op::kSub: return da - db;
      case Op::kMul: return da * b + a * db;
      case Op::kDiv:
        if (db.is_const(0.0)) return da / b;
        return (da * b - a * db) / pow(b, 2.0);
      default: break;
    }
    throw InvalidArgument("diff: unexpected node");
  }

  std::string_view v_;
  std::unordered_map<const Node*, Expr> memo_;
};

}  // namespace

Expr diff(const Expr& e, std::string_view variable) { return Differentiator(variable)(e); }

// ---------------------------------------------------------------------------
// Structural utilities

namespace {

template <class F>
Expr rebuild(const Expr& e, std::unordered_map<const Node*, Expr>& memo, F&& leaf) {
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
  Expr out;
  switch (e.op()) {
    case Op::kConst:
    case Op::kVar: out = leaf(e); break;
    case Op::kPow: out = pow(rebuild(e.arg(), memo, leaf), e.value()); break;
    case Op::kAdd: out = rebuild(e.lhs(), memo, leaf) + rebuild(e.rhs(), memo, leaf); break;
    case Op::kSub: out = rebuild(e.lhs(), memo, leaf) - rebuild(e.rhs(), memo, leaf); break;
    case Op::kMul: out = rebuild(e.lhs(), memo, leaf) * rebuild(e.rhs(), memo, leaf); break;
    case Op::kDiv: out = rebuild(e.lhs(), memo, leaf) / rebuild(e.rhs(), memo, leaf); break;
    default: out = apply(e.op(), rebuild(e.arg(), memo, leaf)); break;
  }
  memo.emplace(e.id(), out);
  return out;
}

}  // namespace

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& replacements) {
  std::unordered_map<const Node*, Expr> memo;
  return rebuild(e, memo, [&](const Expr& leaf) {
    if (leaf.op() == Op::kVar) {
      if (auto it = replacements.find(leaf.name()); it != replacements.end()) return it->second;
    }
    return leaf;
  });
}

Expr fold_constants(const Expr& e) {
  // The folding constructors already collapse constant operands bottom-up;
  // rebuilding through them folds every variable-free subtree that
  // evaluates cleanly.
  std::unordered_map<const Node*, Expr> memo;
  return rebuild(e, memo, [](const Expr& leaf) { return leaf; });
}

std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{e.id()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    if (n->op == Op::kVar) out.insert(n->name);
    if (n->a) stack.push_back(n->a.get());
    if (n->b) stack.push_back(n->b.get());
  }
  return out;
}

bool depends_on(const Expr& e, std::string_view variable) {
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{e.id()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    if (n->op == Op::kVar && n->name == variable) return true;
    if (n->a) stack.push_back(n->a.get());
    if (n->b) stack.push_back(n->b.get());
  }
  return false;
}

std::size_t node_count(const Expr& e) {
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{e.id()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    if (n->a) stack.push_back(n->a.get());
    if (n->b) stack.push_back(n->b.get());
  }
  return seen.size();
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.id() == b.id()) return true;
  if (a.op() != b.op()) return false;
  switch (a.op()) {
    case Op::kConst: return std::signbit(a.value()) == std::signbit(b.value()) && a.value() == b.value();
    case Op::kVar: return a.name() == b.name();
    case Op::kPow: return a.value() == b.value() && structurally_equal(a.arg(), b.arg());
    default: break;
  }
  if (!structurally_equal(a.arg(), b.arg())) return false;
  return !is_binary(a.op()) || structurally_equal(a.rhs(), b.rhs());
}

// ---------------------------------------------------------------------------
// Printing

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

bool is_negative_const(const Expr& e) { return e.is_const() && std::signbit(e.value()); }

// Binding strength used for parenthesisation; higher binds tighter.
int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::kConst: return is_negative_const(e) ? 3 : 5;
    case Op::kVar: return 5;
    case Op::kNeg: return 3;
    case Op::kPow: return 4;
    case Op::kMul:
    case Op::kDiv: return 2;
    case Op::kAdd:
    case Op::kSub: return 1;
    default: return 5;  // function call
  }
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, bool wrap, std::string& out) {
  if (wrap) out += '(';
  print(e, out);
  if (wrap) out += ')';
}

void print(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::kConst: out += format_number(e.value()); return;
    case Op::kVar: out += e.name(); return;
    case Op::kNeg: {
      const Expr a = e.arg();
      out += '-';
      // "-2" would read back as a negative literal, so a non-negative
      // constant operand keeps its parentheses.
      print_wrapped(a, precedence(a) < 3 || (a.is_const() && !is_negative_const(a)), out);
      return;
    }
    case Op::kPow:
      print_wrapped(e.arg(), precedence(e.arg()) <= 4, out);
      out += '^';
      out += format_number(e.value());
      return;
    case Op::kAdd:
    case Op::kSub:
      print(e.lhs(), out);
      out += e.op() == Op::kAdd ? " + " : " - ";
      print_wrapped(e.rhs(), precedence(e.rhs()) <= 1, out);
      return;
    case Op::kMul:
    case Op::kDiv:
      print_wrapped(e.lhs(), precedence(e.lhs()) < 2, out);
      out += e.op() == Op::kMul ? "*" : "/";
      print_wrapped(e.rhs(), precedence(e.rhs()) <= 2, out);
      return;
    default:
      out += function_name(e.op());
      out += '(';
      print(e.arg(), out);
      out += ')';
      return;
  }
}

std::string latex_number(double v) {
  std::string s = format_number(v);
  if (auto pos = s.find('e'); pos != std::string::npos) {
    std::string mant = s.substr(0, pos);
    int ex = std::stoi(s.substr(pos + 1));
    return mant + " \\times 10^{" + std::to_string(ex) + "}";
  }
  return s;
}

void latex(const Expr& e, const std::function<std::string(const std::string&)>& sym, std::string& out);

void latex_wrapped(const Expr& e, bool wrap, const std::function<std::string(const std::string&)>& sym,
                   std::string& out) {
  if (wrap) out += "\\left(";
  latex(e, sym, out);
  if (wrap) out += "\\right)";
}

void latex(const Expr& e, const std::function<std::string(const std::string&)>& sym, std::string& out) {
  switch (e.op()) {
    case Op::kConst: out += latex_number(e.value()); return;
    case Op::kVar: out += sym ? sym(e.name()) : e.name(); return;
    case Op::kNeg:
      out += '-';
      latex_wrapped(e.arg(), precedence(e.arg()) < 3, sym, out);
      return;
    case Op::kPow:
      if (e.value() == 0.5) {
        out += "\\sqrt{";
        latex(e.arg(), sym, out);
        out += '}';
        return;
      }
      out += '{';
      latex_wrapped(e.arg(), precedence(e.arg()) <= 4, sym, out);
      out += "}^{" + latex_number(e.value()) + "}";
      return;
    case Op::kAdd:
    case Op::kSub:
      latex(e.lhs(), sym, out);
      out += e.op() == Op::kAdd ? " + " : " - ";
      latex_wrapped(e.rhs(), precedence(e.rhs()) <= 1, sym, out);
      return;
    case Op::kMul:
      latex_wrapped(e.lhs(), precedence(e.lhs()) < 2, sym, out);
      out += " \\cdot ";
      latex_wrapped(e.rhs(), precedence(e.rhs()) <= 2, sym, out);
      return;
    case Op::kDiv:
      out += "\\frac{";
      latex(e.lhs(), sym, out);
      out += "}{";
      latex(e.rhs(), sym, out);
      out += '}';
      return;
    case Op::kSqrt:
      out += "\\sqrt{";
      latex(e.arg(), sym, out);
      out += '}';
      return;
    case Op::kAbs:
      out += "\\left|";
      latex(e.arg(), sym, out);
      out += "\\right|";
      return;
    case Op::kSign:
      out += "\\operatorname{sgn}\\left(";
      latex(e.arg(), sym, out);
      out += "\\right)";
      return;
    default:
      out += '\\';
      out += function_name(e.op());
      out += "\\left(";
      latex(e.arg(), sym, out);
      out += "\\right)";
      return;
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

std::string to_latex(const Expr& e, const std::function<std::string(const std::string&)>& symbol) {
  std::string out;
  latex(e, symbol, out);
  return out;
}

}  // namespace gradmech

namespace gradmech {

namespace {

// c * rest, with an empty rest standing for 1.
struct Term {
  double coefficient = 1.0;
  std::optional<Expr> rest;
};

Expr build(const Term& t) {
  if (!t.rest) return Expr(t.coefficient);
  if (t.coefficient == 1.0) return *t.rest;
  if (t.coefficient == -1.0) return -*t.rest;
  if (t.coefficient == 0.0) return Expr(0.0);
  return Expr(t.coefficient) * *t.rest;
}

Term split(const Expr& e);

Expr combine(const Expr& a, const Expr& b, bool subtract) {
  Term ta = split(a);
  Term tb = split(b);
  if (subtract) tb.coefficient = -tb.coefficient;
  if (!ta.rest && !tb.rest) return Expr(ta.coefficient + tb.coefficient);
  if (ta.rest && tb.rest && structurally_equal(*ta.rest, *tb.rest)) {
    return build(Term{ta.coefficient + tb.coefficient, ta.rest});
  }
  if (ta.coefficient == 0.0) return build(tb);
  if (tb.coefficient == 0.0) return build(ta);
  if (tb.coefficient < 0.0) return build(ta) - build(Term{-tb.coefficient, tb.rest});
  return build(ta) + build(tb);
}

Term split(const Expr& e) {
  switch (e.op()) {
    case Op::kConst:
      return Term{e.value(), std::nullopt};
    case Op::kVar:
      return Term{1.0, e};
    case Op::kNeg: {
      Term t = split(e.arg());
      t.coefficient = -t.coefficient;
      return t;
    }
    case Op::kMul: {
      const Term a = split(e.lhs());
      const Term b = split(e.rhs());
      Term out{a.coefficient * b.coefficient, std::nullopt};
      if (a.rest && b.rest) {
        out.rest = *a.rest * *b.rest;
      } else if (a.rest) {
        out.rest = a.rest;
      } else {
        out.rest = b.rest;
      }
      return out;
    }
    case Op::kDiv: {
      const Term a = split(e.lhs());
      const Term b = split(e.rhs());
      if (b.coefficient == 0.0) return Term{1.0, e};
      Term out{a.coefficient / b.coefficient, a.rest};
      if (b.rest) out.rest = (a.rest ? *a.rest : Expr(1.0)) / *b.rest;
      return out;
    }
    case Op::kAdd:
    case Op::kSub: {
      const Expr sum = combine(e.lhs(), e.rhs(), e.op() == Op::kSub);
      if (sum.is_const()) return Term{sum.value(), std::nullopt};
      if (sum.op() == Op::kNeg) return Term{-1.0, sum.arg()};
      return Term{1.0, sum};
    }
    case Op::kPow: {
      const Term base = split(e.arg());
      if (!base.rest) return Term{std::pow(base.coefficient, e.value()), std::nullopt};
      return Term{1.0, pow(build(base), e.value())};
    }
    default:
      return Term{1.0, apply(e.op(), simplify(e.arg()))};
  }
}

}  // namespace

Expr simplify(const Expr& e) { return build(split(e)); }

}  // namespace gradmech
