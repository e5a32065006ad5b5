// Coupled Brownian driving noise for interacting particle systems.
//
// A NoiseBundle stores, for every coarse step of a time grid, K Gaussian
// sub-increments per noise channel (N idiosyncratic m1-dimensional noises
// plus one m0-dimensional common noise). Sub-increments are generated by a
// counter-based generator, so a bundle is a pure function of
// (seed, replicate, source, step, substep, component) and can be rebuilt or
// read concurrently in any order. Coarsening regroups the same sub-increments
// onto a coarser grid: both bundles describe the same Brownian paths.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <vector>

#include "rmil/philox.hpp"
#include "rmil/time_grid.hpp"

namespace rmil {

/// Identifies a driving noise: one particle's idiosyncratic Brownian motion
/// or the common noise shared by all particles.
struct NoiseId {
  int index = -1;  // -1 = common noise W^0, else particle index in [0, N)
  static NoiseId common() { return {-1}; }
  static NoiseId particle(int i) { return {i}; }
  bool is_common() const { return index < 0; }
};

class NoiseBundle {
 public:
  const TimeGrid& grid() const { return grid_; }
  int particles() const { return N_; }
  int m1() const { return m1_; }
  int m0() const { return m0_; }
  int substeps() const { return K_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t replicate() const { return replicate_; }
  std::uint32_t stream() const { return stream_; }

  double eta(int j) const { return etas_[j]; }
  const Eigen::VectorXd& etas() const { return etas_; }

  /// Dimension of the noise identified by `id` (m1 or m0).
  int dim(NoiseId id) const { return id.is_common() ? m0_ : m1_; }

  /// Sub-increment k of coarse step j; variance h_j / K.
  double sub_increment(int j, int k, NoiseId id, int component) const {
    return (*fine_)[channel(id, component) * stride_ + static_cast<std::size_t>(j) * K_ + k];
  }

  /// Increment of the full coarse step j (sum of its sub-increments).
  double increment(int j, NoiseId id, int component) const {
    return coarse_(j, channel(id, component));
  }

  /// All components of the coarse increment of step j for one noise.
  Eigen::VectorXd increment_vector(int j, NoiseId id) const {
    const int m = dim(id);
    Eigen::VectorXd v(m);
    for (int l = 0; l < m; ++l) v[l] = increment(j, id, l);
    return v;
  }

  /// Copy of this bundle with the randomisation uniforms replaced
  /// (sensitivity-testing hook; path data unchanged).
  NoiseBundle with_etas(Eigen::VectorXd etas) const;

  friend NoiseBundle sample_noise(const TimeGrid& grid, int N, int m1, int m0, int K,
                                  std::uint64_t seed, std::uint64_t replicate, std::uint32_t stream);
  friend NoiseBundle coarsen(const NoiseBundle& bundle, int factor);
  friend Eigen::VectorXd internal_increment(const NoiseBundle& bundle, int j, NoiseId id);
  friend double iterated_integral(const NoiseBundle& bundle, int j, NoiseId source_a, int l1,
                                  NoiseId source_b, int l);
  friend double iterated_integral_subsampled(const NoiseBundle& bundle, int j, NoiseId source_a,
                                             int l1, NoiseId source_b, int l);

 private:
  NoiseBundle(TimeGrid grid, int N, int m1, int m0, int K) : grid_(std::move(grid)), N_(N), m1_(m1), m0_(m0), K_(K) {}

  int channels() const { return N_ * m1_ + m0_; }
  int channel(NoiseId id, int component) const {
    return id.is_common() ? N_ * m1_ + component : id.index * m1_ + component;
  }
  /// Counter word identifying the noise source; 0 is the common noise so it
  /// is shared across streams (populations), particle draws are not.
  std::uint64_t counter_source(NoiseId id) const {
    return id.is_common() ? 0 : (static_cast<std::uint64_t>(stream_) << 32) | static_cast<std::uint64_t>(id.index + 1);
  }
  void fill_coarse();

  TimeGrid grid_;
  int N_, m1_, m0_, K_;
  std::uint64_t seed_ = 0, replicate_ = 0;
  std::uint32_t stream_ = 0;
  Eigen::VectorXd etas_;
  std::shared_ptr<const std::vector<double>> fine_;  // [channel][step*K + substep]
  std::size_t stride_ = 0;                           // n*K, per channel
  Eigen::MatrixXd coarse_;                           // (n) x channels
};

/// Draws a fully populated bundle on `grid` with K sub-increments per step.
/// All randomness is counter-keyed; equal arguments give bit-identical
/// bundles. `stream` separates particle populations (common noise and the
/// per-step uniforms are shared across streams).
NoiseBundle sample_noise(const TimeGrid& grid, int N, int m1, int m0, int K, std::uint64_t seed,
                         std::uint64_t replicate, std::uint32_t stream = 0);

/// Regroups a bundle on a uniform grid onto the grid with `factor` fewer
/// steps. Sub-increments are shared (each output substep is one input
/// substep), so both bundles describe the same Brownian paths; the output has
/// K_out = factor * K_in substeps per step and freshly keyed uniforms.
NoiseBundle coarsen(const NoiseBundle& bundle, int factor);

/// W_{t_{j-1} + eta_j h_j} - W_{t_{j-1}} for the given noise, built from the
/// sub-increments left of the randomised point plus a Brownian-bridge
/// conditioned fraction of the straddling sub-increment. The bridge draw is
/// counter-keyed, so repeated calls agree bitwise.
Eigen::VectorXd internal_increment(const NoiseBundle& bundle, int j, NoiseId id);

/// Iterated stochastic integral over step j:
///   int_{t_{j-1}}^{t_j} int_{t_{j-1}}^{s} dA_r dB_s,
/// with A = (source_a, component l1) and B = (source_b, component l).
/// Identical channels use the exact identity ((dB)^2 - h_j)/2; otherwise a
/// left-point subsample sum over the K sub-increments (L2 error O(h/sqrt(K))).
double iterated_integral(const NoiseBundle& bundle, int j, NoiseId source_a, int l1,
                         NoiseId source_b, int l);

/// The exact identity for a channel against itself.
inline double diagonal_iterated_integral(double db, double h) { return 0.5 * (db * db - h); }

/// Left-point subsample sum even when the channels coincide; exposes the
/// generic estimator for fidelity diagnostics against the exact identity.
double iterated_integral_subsampled(const NoiseBundle& bundle, int j, NoiseId source_a, int l1,
                                    NoiseId source_b, int l);

/// N x d ensemble with i.i.d. Gaussian rows (mean, std per component);
/// counter-keyed, nested across N for a fixed stream.
Eigen::MatrixXd gaussian_initial_ensemble(int N, int d, double mean, double std_dev,
                                          std::uint64_t seed, std::uint64_t replicate,
                                          std::uint32_t stream = 0);

}  // namespace rmil
