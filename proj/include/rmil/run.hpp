// Subcommand driver shared by the CLI and tests: runs a study or simulation
// from a validated config and writes its CSV plus a JSON manifest.

#pragma once

#include <string>

#include "rmil/config.hpp"

namespace rmil {

/// Exit codes of the driver (and the CLI).
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigError = 2,
  kExitCheckFailed = 3,
};

/// Executes `subcommand` in {simulate, convergence, quadrature, consistency,
/// poc, moments}. Writes <out>/<subcommand>.csv (or trajectory.csv) and
/// <out>/manifest.json. With `check`, returns kExitCheckFailed and records a
/// machine-readable failure entry in the manifest when the study's
/// pass-condition is violated.
int run_subcommand(const std::string& subcommand, const RunConfig& config, bool check);

}  // namespace rmil
