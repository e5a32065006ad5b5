// Wasserstein-2 between equal-size empirical measures, grid-process norms
// (sup and Spijker-type) and pointwise scheme residuals.

#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace rmil {

struct ModelSpec;
class NoiseBundle;
struct Trajectory;
enum class MilsteinMode;

/// Cap for the implicit exact-assignment path of w2 (cubic cost growth);
/// call w2_assignment directly to go beyond it.
inline constexpr int kAssignmentCap = 12;

/// W2 between two equal-size uniform empirical measures (rows are atoms).
/// d = 1 uses the monotone (sorted) coupling; d > 1 uses the exact assignment
/// solver up to kAssignmentCap atoms and is an error beyond that.
double w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Monotone-coupling W2 for d = 1 ensembles.
double w2_sorted_1d(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Exact optimal-assignment W2 for any d and N (Hungarian algorithm, O(N^3)).
double w2_assignment(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Minimum-cost perfect matching of a square cost matrix; returns the
/// column assigned to each row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Monte Carlo sample of a stochastic grid process Y_j^{i} in R^d:
/// one matrix per replicate, row j holds the N particle values side by side
/// (particle i occupies columns [i*d, (i+1)*d)).
struct GridProcessSample {
  std::vector<Eigen::MatrixXd> values;
  int N = 0;
  int d = 1;
  double q = 2.0;  // norm exponent over randomness, q >= 2

  int replicates() const { return static_cast<int>(values.size()); }
  int points() const { return values.empty() ? 0 : static_cast<int>(values.front().rows()); }
};

/// Per-replicate, per-particle statistic max_j |Y_j^i| (M x N).
Eigen::MatrixXd sup_norm_stats(const GridProcessSample& sample);

/// Per-replicate, per-particle statistics for the Spijker norm:
/// first = |Y_0^i|, second = max_{j>=1} |sum_{k=1..j} Y_k^i| (both M x N).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> spijker_stats(const GridProcessSample& sample);

/// max_i ( mean_r stats(r,i)^q )^{1/q}; the Monte Carlo estimate of the
/// L^q-over-randomness aggregate used by both grid norms.
double lq_max_aggregate(const Eigen::MatrixXd& stats, double q);

/// ||Y||_{G,q}: max over particles of the L^q norm of the path maximum.
double grid_sup_norm(const GridProcessSample& sample);

/// Spijker-type norm: max_i ||Y_0^i||_q + max_i || max_j |partial sums| ||_q.
double spijker_norm(const GridProcessSample& sample);

/// Pointwise residuals of a trajectory Y against the scheme's increment map:
///   R_0 = Y_0 - x0_ref,   R_j = Y_j - Y_{j-1} - Gamma_j(Y_{j-1}, ...)
/// where Gamma_j is exactly the randomised Milstein increment evaluated on Y
/// with the bundle's stored eta and increments. A trajectory produced by the
/// scheme itself on the same bundle has identically zero residuals.
/// x0_ref defaults to the trajectory's own initial frame.
GridProcessSample residuals(const ModelSpec& model, const NoiseBundle& bundle,
                            const Trajectory& traj, MilsteinMode mode,
                            const Eigen::MatrixXd* x0_ref = nullptr);

}  // namespace rmil
