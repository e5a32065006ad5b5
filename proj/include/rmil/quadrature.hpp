// Randomised Riemann quadrature for path functionals: the prefix sums
// Theta_n = sum_{j<=n} h_j V(t_{j-1} + eta_j h_j), an unbiased estimator of
// int_0^{t_n} V(s) ds with L^p error of order h^{alpha + 1/2} for
// alpha-Hoelder V.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>

#include "rmil/time_grid.hpp"

namespace rmil {

/// Prefix sums Theta_1..Theta_n of the randomised Riemann rule.
Eigen::VectorXd randomized_riemann_prefixes(const TimeGrid& grid, const Eigen::VectorXd& etas,
                                            const std::function<double(double)>& integrand);

/// Integrand families for the quadrature rate study.
enum class QuadIntegrand {
  constant,  // V = 1             (exact rule)
  linear,    // V(s) = s          (error sum_j h_j^2 (eta_j - 1/2))
  sine,      // V(s) = sin s      (alpha = 1, rate h^{3/2})
  brownian,  // V = W sample path (alpha = 1/2 in L^q, rate h)
};

QuadIntegrand parse_quad_integrand(const std::string& name);
std::string to_string(QuadIntegrand v);

/// One replicate of the quadrature experiment on a grid: Theta prefixes and
/// the exact integrals at the grid nodes. Deterministic; the per-step
/// uniforms and, for the Brownian family, the path are counter-keyed by
/// (seed, replicate). The Brownian path and its time integral are sampled
/// exactly (jointly Gaussian per segment), so the reference carries no
/// discretisation bias.
struct QuadratureRun {
  Eigen::VectorXd theta;  // n entries, prefix sums
  Eigen::VectorXd exact;  // n entries, int_0^{t_n} V
};
QuadratureRun quadrature_run(QuadIntegrand family, const TimeGrid& grid, std::uint64_t seed,
                             std::uint64_t replicate);

}  // namespace rmil
