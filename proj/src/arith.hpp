#pragma once

// Shared scalar kernels for the tree evaluator and the compiled programs, so
// both produce identical bits.

#include <cmath>

#include "gradmech/expr.hpp"

namespace gradmech::detail {

/// Applies `op` to its operands. `param` is the exponent for kPow.
/// Returns nullptr on success, otherwise a description of the domain error.
inline const char* apply(Op op, double a, double b, double param, double& out) {
  switch (op) {
    case Op::kNeg: out = -a; return nullptr;
    case Op::kSqrt:
      if (a < 0.0) return "sqrt of negative value";
      out = std::sqrt(a);
      return nullptr;
    case Op::kSin: out = std::sin(a); return nullptr;
    case Op::kCos: out = std::cos(a); return nullptr;
    case Op::kExp: out = std::exp(a); return nullptr;
    case Op::kLog:
      if (!(a > 0.0)) return "log of non-positive value";
      out = std::log(a);
      return nullptr;
    case Op::kAbs: out = std::fabs(a); return nullptr;
    case Op::kSign: out = a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); return nullptr;
    case Op::kAdd: out = a + b; return nullptr;
    case Op::kSub: out = a - b; return nullptr;
    case Op::kMul: out = a * b; return nullptr;
    case Op::kDiv:
      if (b == 0.0) return "division by zero";
      out = a / b;
      return nullptr;
    case Op::kPow: {
      const bool integral = std::floor(param) == param;
      if (a == 0.0 && param < 0.0) return "division by zero (negative power of zero)";
      if (!integral && a < 0.0) return "non-integer power of negative base";
      if (param == 2.0) {
        out = a * a;
      } else {
        out = std::pow(a, param);
      }
      return nullptr;
    }
    case Op::kConst:
    case Op::kVar: break;
  }
  return "invalid operation";
}

}  // namespace gradmech::detail
