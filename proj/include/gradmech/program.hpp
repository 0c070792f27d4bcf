#pragma once

#include <span>
#include <string>
#include <vector>

#include "gradmech/expr.hpp"

namespace gradmech {

/// A batch of expressions flattened into straight-line code over a fixed
/// variable ordering. Shared subexpressions are computed once. Results are
/// bit-identical to eval() on the same bindings.
class Program {
 public:
  Program() = default;
  Program(const std::vector<Expr>& outputs, const std::vector<std::string>& slots);

  std::size_t inputs() const { return slots_.size(); }
  std::size_t outputs() const { return outputs_.size(); }
  const std::vector<std::string>& slots() const { return slots_; }

  /// Writes one value per output expression. Throws EvalError on domain errors.
  void run(std::span<const double> in, std::span<double> out) const;
  std::vector<double> operator()(std::span<const double> in) const;

 private:
  struct Instr {
    Op op;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double param = 0.0;
    const Node* source = nullptr;
  };

  std::vector<std::string> slots_;
  std::vector<Instr> code_;  // register i holds the value of code_[i]
  std::vector<std::uint32_t> outputs_;
  std::vector<Expr> keep_alive_;
};

}  // namespace gradmech
