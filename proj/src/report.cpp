#include "gradmech/report.hpp"

#include <algorithm>

namespace gradmech {

namespace {

std::string latex_name(const Chart& chart, const std::string& name) {
  if (chart.contains(name)) return chart.latex_symbol(name);
  // Momenta and other symbols outside the chart: split "pi1_2" style names.
  std::vector<JetVar> probe{JetVar{name, name, 1, 0, 0}};
  return Chart(std::move(probe), Prolongation::kQJet).latex_symbol(name);
}

}  // namespace

std::vector<std::string> text_lines(const ELSystem& sys) {
  std::vector<std::string> out;
  for (const auto& m : sys.momenta) out.push_back(m.name + " = " + to_string(simplify(m.value)));
  for (std::size_t i = 0; i < sys.residuals.size(); ++i) {
    out.push_back("0 = " + to_string(simplify(sys.residuals[i])) + "    [" + sys.residual_names[i] + "]");
  }
  return out;
}

std::vector<std::string> latex_lines(const ELSystem& sys) {
  auto sym = [&](const std::string& n) { return latex_name(sys.chart, n); };
  std::vector<std::string> out;
  for (const auto& m : sys.momenta) out.push_back(sym(m.name) + " &= " + to_latex(simplify(m.value), sym));
  for (const auto& r : sys.residuals) out.push_back("0 &= " + to_latex(simplify(r), sym));
  return out;
}

std::vector<std::string> text_lines(const MomentaSet& m) {
  std::vector<std::string> out;
  for (int j = 1; j <= m.order; ++j) {
    for (int b = 0; b < m.rank; ++b) out.push_back(momentum_name(m.rank, j, b + 1) + " = " + to_string(simplify(m.at(j, b))));
  }
  return out;
}

std::vector<std::string> latex_lines(const MomentaSet& m) {
  auto sym = [&](const std::string& n) { return latex_name(m.chart, n); };
  std::vector<std::string> out;
  for (int j = 1; j <= m.order; ++j) {
    for (int b = 0; b < m.rank; ++b) {
      out.push_back(sym(momentum_name(m.rank, j, b + 1)) + " &= " + to_latex(simplify(m.at(j, b)), sym));
    }
  }
  return out;
}

nlohmann::json to_json(const ELSystem& sys) {
  nlohmann::json j;
  j["kind"] = sys.kind;
  j["chart"] = sys.chart.names();
  j["prolongation"] = sys.chart.rule() == Prolongation::kYGraded ? "ygraded" : "qjet";
  auto& res = j["residuals"] = nlohmann::json::array();
  for (std::size_t i = 0; i < sys.residuals.size(); ++i) {
    res.push_back({{"name", sys.residual_names[i]}, {"expression", to_string(simplify(sys.residuals[i]))}});
  }
  auto& mom = j["momenta"] = nlohmann::json::array();
  for (const auto& m : sys.momenta) mom.push_back({{"name", m.name}, {"expression", to_string(simplify(m.value))}});
  auto& con = j["constraints"] = nlohmann::json::array();
  for (const auto& c : sys.constraints) con.push_back({{"variable", c.variable}, {"rate", to_string(simplify(c.rate))}});
  j["regular"] = sys.regular;
  j["hessian_condition"] = sys.hessian_condition;
  if (sys.explicit_form) {
    const ExplicitForm& f = *sys.explicit_form;
    nlohmann::json e;
    e["state"] = f.state;
    auto& rates = e["rates"] = nlohmann::json::array();
    for (std::size_t i = 0; i < f.state.size(); ++i) {
      const bool solved = std::find(f.solved.begin(), f.solved.end(), i) != f.solved.end();
      rates.push_back({{"variable", f.state[i]}, {"rate", solved ? "solved from the top Hessian" : to_string(simplify(f.rates[i]))}});
    }
    e["conserved"] = f.conserved_names;
    j["explicit_form"] = e;
  }
  return j;
}

nlohmann::json to_json(const MomentaSet& m) {
  nlohmann::json j = nlohmann::json::array();
  for (int jj = 1; jj <= m.order; ++jj) {
    for (int b = 0; b < m.rank; ++b) {
      j.push_back({{"name", momentum_name(m.rank, jj, b + 1)}, {"expression", to_string(simplify(m.at(jj, b)))}});
    }
  }
  return j;
}

std::string latex_document(const std::vector<std::pair<std::string, std::vector<std::string>>>& sections) {
  std::string out = "\\documentclass{article}\n\\usepackage{amsmath}\n\\begin{document}\n";
  for (const auto& [title, lines] : sections) {
    out += "\\section*{" + title + "}\n\\begin{align*}\n";
    for (std::size_t i = 0; i < lines.size(); ++i) out += lines[i] + (i + 1 < lines.size() ? " \\\\\n" : "\n");
    out += "\\end{align*}\n";
  }
  out += "\\end{document}\n";
  return out;
}

}  // namespace gradmech
