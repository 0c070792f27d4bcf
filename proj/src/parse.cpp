// Recursive-descent parser for the expression grammar (see docs/grammar.md).
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | identifier | identifier '(' expr ')' | '(' expr ')'
//
// A '-' directly followed by a number literal that is not itself raised to a
// power reads as a negative literal.

#include <cctype>
#include <charconv>
#include <string>
#include <vector>

#include "gradmech/errors.hpp"
#include "gradmech/expr.hpp"

namespace gradmech {

namespace {

enum class Tok { kNumber, kIdent, kPlus, kMinus, kStar, kSlash, kCaret, kLParen, kRParen, kEnd };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  std::size_t line = 1;
  std::size_t column = 1;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::kEnd: return "end of input";
    case Tok::kNumber:
    case Tok::kIdent: return "'" + t.text + "'";
    default: return "'" + t.text + "'";
  }
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t line = 1;
  std::size_t col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token t{Tok::kEnd, {}, 0.0, line, col};
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j < src.size() && src[j] == '.') {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
          j = k;
        }
      }
      t.kind = Tok::kNumber;
      t.text = std::string(src.substr(i, j - i));
      auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size()) {
        throw ParseError("malformed number '" + t.text + "'", line, col);
      }
      advance(j - i);
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Tok::kIdent;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else {
      switch (c) {
        case '+': t.kind = Tok::kPlus; break;
        case '-': t.kind = Tok::kMinus; break;
        case '*': t.kind = Tok::kStar; break;
        case '/': t.kind = Tok::kSlash; break;
        case '^': t.kind = Tok::kCaret; break;
        case '(': t.kind = Tok::kLParen; break;
        case ')': t.kind = Tok::kRParen; break;
        default: throw ParseError(std::string("unexpected character '") + c + "'", line, col);
      }
      t.text = std::string(1, c);
      advance(1);
    }
    out.push_back(std::move(t));
  }
  out.push_back(Token{Tok::kEnd, {}, 0.0, line, col});
  return out;
}

Op lookup_function(std::string_view name) {
  if (name == "sqrt") return Op::kSqrt;
  if (name == "sin") return Op::kSin;
  if (name == "cos") return Op::kCos;
  if (name == "exp") return Op::kExp;
  if (name == "log") return Op::kLog;
  if (name == "abs") return Op::kAbs;
  if (name == "sign") return Op::kSign;
  return Op::kConst;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Expr parse_all() {
    Expr e = expr();
    if (peek().kind != Tok::kEnd) fail("unexpected " + describe(peek()));
    return e;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  [[noreturn]] void fail(const std::string& msg) const { fail_at(msg, peek()); }
  [[noreturn]] static void fail_at(const std::string& msg, const Token& t) {
    throw ParseError("syntax error: " + msg, t.line, t.column);
  }

  Expr expr() {
    Expr lhs = term();
    while (peek().kind == Tok::kPlus || peek().kind == Tok::kMinus) {
      const Op op = take().kind == Tok::kPlus ? Op::kAdd : Op::kSub;
      lhs = Expr::raw(op, lhs, term());
    }
    return lhs;
  }

  Expr term() {
    Expr lhs = unary();
    while (peek().kind == Tok::kStar || peek().kind == Tok::kSlash) {
      const Op op = take().kind == Tok::kStar ? Op::kMul : Op::kDiv;
      lhs = Expr::raw(op, lhs, unary());
    }
    return lhs;
  }

  Expr unary() {
    if (peek().kind == Tok::kMinus) {
      take();
      if (peek().kind == Tok::kNumber && peek(1).kind != Tok::kCaret) return Expr(-take().number);
      return Expr::raw(Op::kNeg, unary());
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (peek().kind != Tok::kCaret) return base;
    take();
    const Token& at = peek();
    const Expr exponent = unary();
    if (!free_variables(exponent).empty()) fail_at("exponent must be a constant", at);
    double value = 0.0;
    try {
      value = eval(exponent, {});
    } catch (const EvalError& err) {
      fail_at(std::string("invalid exponent: ") + err.what(), at);
    }
    return Expr::raw_pow(base, value);
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kNumber: take(); return Expr(t.number);
      case Tok::kIdent: {
        take();
        if (peek().kind == Tok::kLParen) {
          const Op fn = lookup_function(t.text);
          if (fn == Op::kConst) fail_at("unknown function '" + t.text + "'", t);
          take();
          Expr arg = expr();
          expect_rparen();
          return Expr::raw(fn, arg);
        }
        if (lookup_function(t.text) != Op::kConst) fail_at("function '" + t.text + "' requires an argument", t);
        return Expr::var(t.text);
      }
      case Tok::kLParen: {
        take();
        Expr inner = expr();
        expect_rparen();
        return inner;
      }
      default: fail("unexpected " + describe(t));
    }
  }

  void expect_rparen() {
    if (peek().kind != Tok::kRParen) fail("expected ')' but found " + describe(peek()));
    take();
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view source) { return Parser(lex(source)).parse_all(); }

}  // namespace gradmech
