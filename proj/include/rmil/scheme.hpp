// Time-stepping engines acting on whole ensembles: the drift-randomised
// Milstein scheme (full, measure-term-free and commutative variants) and an
// Euler-Maruyama baseline.

#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "rmil/model.hpp"
#include "rmil/noise.hpp"

namespace rmil {

enum class SchemeKind { euler, milstein };

enum class MilsteinMode {
  automatic,           // full when N <= 64, drop_measure_terms above
  full,                // all cross-particle measure-derivative terms
  drop_measure_terms,  // omit the O(1/N) measure-derivative terms
  commutative,         // reduced pairwise update; requires m0 == 0
};

std::string to_string(SchemeKind k);
std::string to_string(MilsteinMode m);

struct Trajectory {
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> frames;  // n+1 ensembles, N x d
  SchemeKind scheme = SchemeKind::milstein;
  MilsteinMode mode = MilsteinMode::automatic;
  bool diverged = false;
  int diverged_step = -1;                   // first step that produced a non-finite value
  std::vector<Eigen::MatrixXd> predictors;  // n predictor ensembles when retained

  Trajectory() : grid(TimeGrid::uniform(1.0, 1)) {}
  explicit Trajectory(TimeGrid g) : grid(std::move(g)) {}
};

/// Euler half-step to the randomised point t_{j-1} + eta_j h_j:
///   x + eta h b(t_{j-1}, x, mu) + sigma1 dW|_partial + sigma0 dW0|_partial.
Eigen::MatrixXd predictor_step(const ModelSpec& model, const NoiseBundle& bundle, int j,
                               const Eigen::MatrixXd& ens);

/// The scheme increment Gamma_j for every particle: drift at the randomised
/// predictor plus the sigma-tilde stochastic terms with integrands frozen at
/// t_{j-1}. Optionally returns the predictor ensemble.
Eigen::MatrixXd milstein_increment(const ModelSpec& model, const NoiseBundle& bundle, int j,
                                   const Eigen::MatrixXd& ens, MilsteinMode mode,
                                   Eigen::MatrixXd* predictor_out = nullptr);

/// One randomised Milstein step: ens + milstein_increment.
Eigen::MatrixXd milstein_step(const ModelSpec& model, const NoiseBundle& bundle, int j,
                              const Eigen::MatrixXd& ens, MilsteinMode mode = MilsteinMode::automatic);

/// One Euler-Maruyama step: x + h b + sigma1 dW + sigma0 dW0.
Eigen::MatrixXd euler_step(const ModelSpec& model, const NoiseBundle& bundle, int j,
                           const Eigen::MatrixXd& ens);

/// Advances the initial ensemble through every step of the bundle's grid.
/// All particles advance through step j before any starts step j+1 (the
/// empirical measure is a step-synchronisation barrier). Non-finite values
/// flag the run as diverged instead of throwing; the offending frame is
/// carried forward. Deterministic for any worker count.
Trajectory simulate(const ModelSpec& model, const NoiseBundle& bundle,
                    const Eigen::MatrixXd& initial, SchemeKind scheme,
                    MilsteinMode mode = MilsteinMode::automatic, int workers = 1,
                    bool keep_predictors = false);

/// Mode actually executed for a given request (resolves `automatic`; rejects
/// commutative mode with common noise present).
MilsteinMode resolve_mode(const ModelSpec& model, MilsteinMode requested, int N);

}  // namespace rmil
