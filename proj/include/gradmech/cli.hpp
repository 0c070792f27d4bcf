#pragma once

// Command-line front end: JSON problem configs, the check / derive / simulate
// / plateau / residual commands and their reports.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gradmech/algebroid.hpp"
#include "gradmech/chart.hpp"
#include "gradmech/errors.hpp"
#include "gradmech/expr.hpp"
#include "gradmech/strings.hpp"

namespace gradmech::cli {

/// Invalid or incomplete configuration; maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

struct HomogeneityItem {
  std::string label;
  Expr expression;
  Chart chart;
  int degree = 1;
};

struct ProblemConfig {
  std::string kind;  // first_order | higher | lie_algebra | g2 | string_residual | plateau
  std::filesystem::path base_dir;

  std::optional<AlgebroidSpec> algebroid;
  int dimension = 1;  // first_order only
  int order = 1;
  std::optional<Expr> lagrangian;
  std::optional<Expr> hamiltonian;
  bool left_convention = false;  // g2 only

  double T = 10.0;
  double dt = 1e-3;
  double tolerance = 1e-9;
  double drift_tolerance = 1e-8;
  int samples = 200;
  std::uint64_t seed = 20240601;
  std::size_t stride = 1;
  Bindings initial_jets;
  Bindings initial_state;

  std::size_t nx = 65;
  std::size_t ny = 65;
  std::array<double, 4> domain{-1.0, 1.0, -1.0, 1.0};
  int max_iter = 50;
  double error_tolerance = 1e-3;
  std::optional<Expr> boundary;
  std::optional<Expr> exact;

  std::optional<SurfaceGrid> surface;
  std::optional<BivectorLagrangian> string_lagrangian;

  std::vector<HomogeneityItem> homogeneity;
  std::optional<double> reference_coefficient;

  std::string out_dir;
  std::string format = "csv";
};

/// Parses and validates a config; relative paths resolve against base_dir.
/// Throws ConfigError.
ProblemConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
ProblemConfig load_config(const std::filesystem::path& path);

struct Options {
  std::string command;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
  bool latex = false;
};

/// Runs one command; returns the exit code.
int run_command(const Options& options, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to run_command.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gradmech::cli
