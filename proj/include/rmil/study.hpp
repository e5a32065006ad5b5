// Orchestrated Monte Carlo studies: strong convergence order, randomised
// quadrature rate, consistency order, propagation-of-chaos trend and moment
// stability. Every study is a pure function of its configuration and seed;
// replicates run in parallel with deterministic aggregation, so reports are
// identical for any worker count.

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rmil/model.hpp"
#include "rmil/quadrature.hpp"
#include "rmil/scheme.hpp"

namespace rmil {

/// Least-squares fit of log2(error) against log2(scale).
struct FitResult {
  bool valid = false;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();  // RMS of fit residuals
  std::vector<double> pair_orders;  // observed order per adjacent level pair
  int used_levels = 0;
  std::string warning;
};

/// Slope of log2(error) vs log2(scale); nonpositive or non-finite errors are
/// excluded with a warning and at least 3 usable levels are required.
FitResult fit_order(const std::vector<std::pair<double, double>>& levels);

struct StudyLevel {
  double scale = 0.0;  // h or N
  double error = 0.0;
  double std_error = 0.0;  // replicate-bootstrap standard error
  int replicates = 0;
};

struct StudyReport {
  std::string kind;
  std::vector<StudyLevel> levels;  // decreasing h, or increasing N for poc
  FitResult fit;
  double slope_lo = std::numeric_limits<double>::quiet_NaN();  // 95% bootstrap interval
  double slope_hi = std::numeric_limits<double>::quiet_NaN();
  bool monotone_decreasing = false;                                 // poc trend
  double max_rel_spread = std::numeric_limits<double>::quiet_NaN();  // moments spread
  bool stable = false;                                               // moments verdict
  bool any_divergence = false;
  std::vector<int> diverged_replicates;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  int replicates = 0;
};

struct StudyOptions {
  double q = 2.0;             // norm exponent over randomness
  double p = 4.0;             // moment exponent (moment study)
  int K = 0;                  // substeps override; 0 = default policy
  double x0 = 1.0;            // initial state (every component)
  double x0_std = 0.0;        // i.i.d. Gaussian spread of the initial ensemble
  int workers = 1;
  int bootstrap_resamples = 200;
  MilsteinMode mode = MilsteinMode::automatic;
};

/// Strong error against the exact solution (closed form on the shared path)
/// or, without a closed form, against the same scheme at step h_ref on the
/// coupled fine bundle. Error per level is the G_q grid-sup norm of the
/// difference at the coarse nodes.
StudyReport strong_convergence_study(const ModelSpec& model, double T, int N,
                                     const std::vector<double>& h_levels, double h_ref, int M,
                                     SchemeKind scheme, std::uint64_t seed,
                                     const StudyOptions& opts = {});

/// Max-over-prefixes quadrature error of the randomised Riemann rule.
StudyReport quadrature_study(QuadIntegrand family, double T, const std::vector<double>& h_levels,
                             int M, std::uint64_t seed, const StudyOptions& opts = {});

/// Spijker-norm residual of the h_ref reference trajectory restricted to each
/// coarse grid; consistency of order 1 shows as slope ~ 1.
StudyReport consistency_study(const ModelSpec& model, double T, int N,
                              const std::vector<double>& h_levels, double h_ref, int M,
                              std::uint64_t seed, const StudyOptions& opts = {});

/// Mean terminal W2 between the N-particle system and an independent
/// N_ref-particle system driven by the same common noise. Requires d = 1 and
/// each N level dividing N_ref (atoms are replicated to equal size before the
/// monotone coupling).
StudyReport poc_study(const ModelSpec& model, double T, double h, const std::vector<int>& N_levels,
                      int N_ref, int M, std::uint64_t seed, const StudyOptions& opts = {});

/// max_i || max_j |X_j^i| ||_p per level; stable when finite and varying by
/// less than 20% across levels. Divergence is reported, not thrown.
StudyReport moment_stability_check(const ModelSpec& model, double T, int N,
                                   const std::vector<double>& h_levels, int M, double p,
                                   std::uint64_t seed, const StudyOptions& opts = {});

/// Default substep policy K = ceil(1/h) for a directly sampled bundle.
int default_substeps(double h);

}  // namespace rmil
