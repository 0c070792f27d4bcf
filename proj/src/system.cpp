#include "gradmech/system.hpp"

#include <limits>
#include <map>
#include <random>

#include "gradmech/errors.hpp"

namespace gradmech {

namespace {

std::vector<Expr> flatten(const std::vector<std::vector<Expr>>& m) {
  std::vector<Expr> out;
  for (const auto& row : m) out.insert(out.end(), row.begin(), row.end());
  return out;
}

}  // namespace

ExplicitRhs::ExplicitRhs(const ExplicitForm& form) : dim_(form.state.size()), solved_(form.solved) {
  if (form.rates.size() != dim_ || form.from_jets.size() != dim_) {
    throw InvalidArgument("explicit form: rates and state differ in size");
  }
  std::vector<bool> is_solved(dim_, false);
  for (std::size_t r : solved_) is_solved.at(r) = true;
  std::vector<Expr> free_rates;
  for (std::size_t i = 0; i < dim_; ++i) {
    if (!is_solved[i]) {
      free_rows_.push_back(i);
      free_rates.push_back(form.rates[i]);
    }
  }
  rates_ = Program(free_rates, form.state);
  std::vector<Expr> hf = flatten(form.hessian);
  hf.insert(hf.end(), form.forcing.begin(), form.forcing.end());
  hessian_ = Program(hf, form.state);
  conserved_ = Program(form.conserved, form.state);
}

void ExplicitRhs::operator()(std::span<const double> state, std::span<double> rate) const {
  std::vector<double> free(free_rows_.size());
  rates_.run(state, free);
  for (std::size_t i = 0; i < free_rows_.size(); ++i) rate[free_rows_[i]] = free[i];
  if (solved_.empty()) return;
  const std::size_t n = solved_.size();
  const std::vector<double> hf = hessian_(state);
  Matrix h(n, std::vector<double>(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) h[a][b] = hf[a * n + b];
  }
  std::vector<double> f(hf.begin() + static_cast<std::ptrdiff_t>(n * n), hf.end());
  std::vector<double> solution;
  try {
    solution = dense_solve(std::move(h), std::move(f));
  } catch (const SingularJacobian& e) {
    throw SingularLegendre(std::string("top Hessian is singular: ") + e.what());
  }
  for (std::size_t a = 0; a < n; ++a) rate[solved_[a]] = solution[a];
}

double ExplicitRhs::hessian_condition(std::span<const double> state) const {
  const std::size_t n = solved_.size();
  if (n == 0) return 1.0;
  const std::vector<double> hf = hessian_(state);
  Matrix h(n, std::vector<double>(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) h[a][b] = hf[a * n + b];
  }
  return condition_number(h);
}

std::vector<double> ExplicitRhs::conserved(std::span<const double> state) const { return conserved_(state); }

ExplicitForm reduce_to_first_order(const ReductionInput& in) {
  const std::size_t k = in.fibre.size();
  if (k == 0) throw InvalidArgument("reduction needs at least one fibre order");
  const std::size_t n = in.fibre[0].size();
  if (in.momentum.size() != k || in.momentum_jets.size() != k || in.fibre_factor.size() + 1 < k ||
      in.gamma.size() + 1 < k || in.force.size() != n || in.base_rates.size() != in.base.size()) {
    throw InvalidArgument("reduction input has inconsistent sizes");
  }
  const Expr& L = in.lagrangian;
  auto scale = [&](std::size_t r) { return in.momentum_scale.empty() ? 1.0 : in.momentum_scale.at(r); };
  // P^a_r in terms of the state.
  auto P = [&](std::size_t r, std::size_t a) { return Expr(scale(r)) * Expr::var(in.momentum[r][a]); };

  ExplicitForm form;
  std::map<std::string, Expr, std::less<>> rate;
  for (std::size_t A = 0; A < in.base.size(); ++A) {
    form.state.push_back(in.base[A]);
    rate[in.base[A]] = in.base_rates[A];
    form.from_jets.push_back(Expr::var(in.base[A]));
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t a = 0; a < n; ++a) {
      const std::string& y = in.fibre[i][a];
      form.state.push_back(y);
      form.from_jets.push_back(Expr::var(y));
      if (i + 1 < k) rate[y] = Expr(in.fibre_factor[i]) * Expr::var(in.fibre[i + 1][a]);
    }
  }
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t a = 0; a < n; ++a) {
      const std::string& p = in.momentum[r][a];
      form.state.push_back(p);
      form.from_jets.push_back(in.momentum_jets[r][a] * Expr(1.0 / scale(r)));
      if (r == 0) {
        rate[p] = in.force[a] * Expr(1.0 / scale(r));
      } else {
        rate[p] = (diff(L, in.fibre[r - 1][a]) - P(r - 1, a)) * Expr(1.0 / (in.gamma[r - 1] * scale(r)));
      }
    }
  }

  // Variables whose rates enter the mixed-partial correction.
  std::vector<std::string> known(in.base);
  for (std::size_t i = 0; i + 1 < k; ++i) known.insert(known.end(), in.fibre[i].begin(), in.fibre[i].end());

  const auto& top = in.fibre[k - 1];
  for (std::size_t a = 0; a < n; ++a) {
    const Expr dl = diff(L, top[a]);
    std::vector<Expr> row;
    for (std::size_t b = 0; b < n; ++b) row.push_back(diff(dl, top[b]));
    form.hessian.push_back(std::move(row));
    Expr f = Expr(scale(k - 1)) * rate.at(in.momentum[k - 1][a]);
    for (const auto& v : known) {
      const Expr mixed = diff(dl, v);
      if (!mixed.is_const(0.0)) f = f - mixed * rate.at(v);
    }
    form.forcing.push_back(f);
  }

  for (std::size_t i = 0; i < form.state.size(); ++i) {
    const std::string& s = form.state[i];
    if (auto it = rate.find(s); it != rate.end()) {
      form.rates.push_back(it->second);
    } else {
      form.solved.push_back(i);
      form.rates.push_back(Expr(0.0));
    }
  }

  Expr energy = -L;
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t a = 0; a < n; ++a) energy = energy + P(r, a) * Expr::var(in.fibre[r][a]);
  }
  form.conserved_names.push_back("energy");
  form.conserved.push_back(energy);
  return form;
}

std::vector<double> sample_hessian_conditions(const std::vector<std::vector<Expr>>& hessian, int samples,
                                              std::uint64_t seed) {
  std::set<std::string> vars;
  for (const auto& row : hessian) {
    for (const auto& e : row) {
      const auto fv = free_variables(e);
      vars.insert(fv.begin(), fv.end());
    }
  }
  const std::vector<std::string> slots(vars.begin(), vars.end());
  const Program program(flatten(hessian), slots);
  const std::size_t n = hessian.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::vector<double> conds;
  std::vector<double> point(slots.size());
  for (int s = 0; s < samples; ++s) {
    for (auto& v : point) v = coord(rng);
    try {
      const std::vector<double> h = program(point);
      Matrix m(n, std::vector<double>(n));
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) m[a][b] = h[a * n + b];
      }
      conds.push_back(condition_number(m));
    } catch (const EvalError&) {
      conds.push_back(std::numeric_limits<double>::infinity());
    }
  }
  return conds;
}

}  // namespace gradmech
