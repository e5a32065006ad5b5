// Run configuration: one canonical human-editable key=value format,
// versioned with schema_version. Unknown keys are errors, and validation
// reports every violation, not just the first.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rmil/quadrature.hpp"
#include "rmil/scheme.hpp"

namespace rmil {

struct RunConfig {
  int schema_version = 1;
  std::string model;                           // builtin name; empty for quadrature runs
  std::map<std::string, double> model_params;  // model.<key> entries
  SchemeKind scheme = SchemeKind::milstein;
  MilsteinMode mode = MilsteinMode::automatic;
  double T = 1.0;
  int n = 16;  // steps for `simulate`
  std::vector<double> h_levels;
  double h_ref = 0.0;  // 0 = unset
  int K = 0;           // substeps override; 0 = policy default
  int N = 1;
  std::vector<int> N_levels;
  int N_ref = 0;
  int M = 100;
  double q = 2.0;
  double p = 4.0;
  std::uint64_t seed = 1;
  double x0 = 1.0;
  double x0_std = 0.0;
  std::string out = "out";
  int workers = 1;
  QuadIntegrand integrand = QuadIntegrand::brownian;
  double check_slope_min = 0.8;
  double check_slope_max = 1.2;
  double check_max_spread = 0.2;

  bool operator==(const RunConfig&) const = default;
};

struct ParseResult {
  std::optional<RunConfig> config;  // set only when errors is empty
  std::vector<std::string> errors;
};

/// Parses and validates the canonical text format. Values may be plain
/// numbers or 2^k exponent notation; lists are comma-separated.
ParseResult parse_config(const std::string& text);

/// Canonical serialisation: every key explicit, fixed order, full precision.
/// parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const RunConfig& config);

/// Subcommand-specific requirements (required fields per study kind).
std::vector<std::string> validate_for(const RunConfig& config, const std::string& subcommand);

}  // namespace rmil
