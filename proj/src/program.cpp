#include "gradmech/program.hpp"

#include <unordered_map>

#include "arith.hpp"
#include "gradmech/errors.hpp"

namespace gradmech {

Program::Program(const std::vector<Expr>& outputs, const std::vector<std::string>& slots)
    : slots_(slots), keep_alive_(outputs) {
  std::unordered_map<std::string, std::uint32_t> slot_of;
  for (std::size_t i = 0; i < slots.size(); ++i) slot_of.emplace(slots[i], static_cast<std::uint32_t>(i));

  // Registers [0, slots) hold the inputs.
  for (std::size_t i = 0; i < slots.size(); ++i) code_.push_back(Instr{Op::kVar});

  std::unordered_map<const Node*, std::uint32_t> reg_of;
  // Iterative post-order so deep derivative trees do not exhaust the stack.
  for (const Expr& root : outputs) {
    std::vector<std::pair<const Node*, bool>> stack{{root.id(), false}};
    while (!stack.empty()) {
      auto [n, expanded] = stack.back();
      stack.pop_back();
      if (reg_of.count(n)) continue;
      if (n->op == Op::kVar) {
        auto it = slot_of.find(n->name);
        if (it == slot_of.end()) throw EvalError("unbound variable '" + n->name + "'", n->name);
        reg_of.emplace(n, it->second);
        continue;
      }
      if (n->op == Op::kConst) {
        reg_of.emplace(n, static_cast<std::uint32_t>(code_.size()));
        code_.push_back(Instr{Op::kConst, 0, 0, n->value, n});
        continue;
      }
      if (!expanded) {
        stack.push_back({n, true});
        if (n->b) stack.push_back({n->b.get(), false});
        stack.push_back({n->a.get(), false});
        continue;
      }
      Instr ins{n->op, reg_of.at(n->a.get()), n->b ? reg_of.at(n->b.get()) : 0u, n->value, n};
      reg_of.emplace(n, static_cast<std::uint32_t>(code_.size()));
      code_.push_back(ins);
    }
    outputs_.push_back(reg_of.at(root.id()));
  }
}

void Program::run(std::span<const double> in, std::span<double> out) const {
  if (in.size() != slots_.size()) throw InvalidArgument("Program::run: wrong number of inputs");
  if (out.size() != outputs_.size()) throw InvalidArgument("Program::run: wrong number of outputs");
  std::vector<double> regs(code_.size());
  double* r = regs.data();
  for (std::size_t i = 0; i < in.size(); ++i) r[i] = in[i];
  for (std::size_t i = in.size(); i < code_.size(); ++i) {
    const Instr& ins = code_[i];
    if (ins.op == Op::kConst) {
      r[i] = ins.param;
      continue;
    }
    if (const char* why = detail::apply(ins.op, r[ins.a], r[ins.b], ins.param, r[i])) {
      throw EvalError(why, to_string(Expr(std::shared_ptr<const Node>(ins.source, [](const Node*) {}))));
    }
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = r[outputs_[k]];
}

std::vector<double> Program::operator()(std::span<const double> in) const {
  std::vector<double> out(outputs_.size());
  run(in, out);
  return out;
}

}  // namespace gradmech
