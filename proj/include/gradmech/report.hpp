#pragma once

// Plain-text, LaTeX and JSON renderings of derived systems.

#include <string>
#include <vector>

#include <json.hpp>

#include "gradmech/higher.hpp"
#include "gradmech/system.hpp"

namespace gradmech {

/// "name = expr" lines for the momenta, "0 = residual" lines for the
/// equations and "d/dt v = rate" lines for the constraints.
std::vector<std::string> text_lines(const ELSystem& sys);
std::vector<std::string> latex_lines(const ELSystem& sys);
std::vector<std::string> text_lines(const MomentaSet& m);
std::vector<std::string> latex_lines(const MomentaSet& m);

nlohmann::json to_json(const ELSystem& sys);
nlohmann::json to_json(const MomentaSet& m);

/// A standalone LaTeX document with one align* block per section.
std::string latex_document(const std::vector<std::pair<std::string, std::vector<std::string>>>& sections);

}  // namespace gradmech
