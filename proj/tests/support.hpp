#pragma once

// Seeded generators and small helpers shared by the test suites.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gradmech/expr.hpp"
#include "gradmech/numerics.hpp"

namespace testing {

using gradmech::Bindings;
using gradmech::Expr;
using gradmech::Op;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  Bindings point(const std::vector<std::string>& names, double range = 1.0) {
    Bindings b;
    for (const auto& n : names) b[n] = uniform(-range, range);
    return b;
  }

  /// Arbitrary AST built verbatim (no folding); any operator, any constant.
  Expr raw_tree(const std::vector<std::string>& vars, int depth) {
    if (depth <= 0 || integer(0, 4) == 0) {
      if (coin()) return Expr::var(vars[integer(0, static_cast<int>(vars.size()) - 1)]);
      const double values[] = {0.0, 1.0, 2.0, 0.5, 3.25, 1e-3, 12345.0, 1.0 / 3.0, 6.02e23};
      return Expr(values[integer(0, 8)]);
    }
    static const Op unary[] = {Op::kNeg, Op::kSqrt, Op::kSin, Op::kCos, Op::kExp, Op::kLog, Op::kAbs, Op::kSign};
    static const Op binary[] = {Op::kAdd, Op::kSub, Op::kMul, Op::kDiv};
    switch (integer(0, 2)) {
      case 0:
        return Expr::raw(unary[integer(0, 7)], raw_tree(vars, depth - 1));
      case 1: {
        const double exps[] = {2.0, 3.0, -1.0, 0.5, 1.5, -2.0};
        return Expr::raw_pow(raw_tree(vars, depth - 1), exps[integer(0, 5)]);
      }
      default:
        return Expr::raw(binary[integer(0, 3)], raw_tree(vars, depth - 1), raw_tree(vars, depth - 1));
    }
  }

  /// Smooth expression defined on all of R^n: no poles, logs or roots of
  /// possibly negative arguments.
  Expr smooth(const std::vector<std::string>& vars, int depth) {
    if (depth <= 0 || integer(0, 3) == 0) {
      if (integer(0, 3) == 0) return Expr(uniform(-2.0, 2.0));
      return Expr::var(vars[integer(0, static_cast<int>(vars.size()) - 1)]);
    }
    const Expr a = smooth(vars, depth - 1);
    switch (integer(0, 9)) {
      case 0: return a + smooth(vars, depth - 1);
      case 1: return a - smooth(vars, depth - 1);
      case 2: return a * smooth(vars, depth - 1);
      case 3: return a / (Expr(2.0) + gradmech::cos(smooth(vars, depth - 1)));
      case 4: return gradmech::sin(a);
      case 5: return gradmech::cos(a);
      case 6: return gradmech::exp(gradmech::sin(a));
      case 7: return gradmech::sqrt(Expr(1.0) + a * a);
      case 8: return gradmech::log(Expr(2.0) + gradmech::cos(a));
      default: return gradmech::pow(a, static_cast<double>(integer(2, 3)));
    }
  }

  /// Sum of `terms` monomials with random coefficients in [-1, 1].
  Expr polynomial(const std::vector<std::string>& vars, int terms, int max_degree) {
    Expr out(0.0);
    for (int t = 0; t < terms; ++t) {
      Expr mono(uniform(-1.0, 1.0));
      const int degree = integer(1, max_degree);
      for (int d = 0; d < degree; ++d) mono = mono * Expr::var(vars[integer(0, static_cast<int>(vars.size()) - 1)]);
      out = out + mono;
    }
    return out;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double rel_diff(double a, double b) {
  const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) / scale;
}

/// Least-squares slope of log(err) against log(h).
inline double loglog_slope(const std::vector<double>& h, const std::vector<double>& err) {
  const std::size_t n = h.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(h[i]);
    const double y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace testing
