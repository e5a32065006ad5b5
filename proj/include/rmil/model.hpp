// Coefficient specification for mean-field models with empirical-measure
// arguments.
//
// Measure arguments are always finite ensembles: an N x d matrix whose rows
// are the particle positions, representing the uniform-weight atomic measure
// (1/N) sum of deltas. All callbacks must be pure and safe for concurrent
// invocation.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <string>

namespace rmil {

using DriftFn = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x, const Eigen::MatrixXd& ens)>;
using DiffusionFn = std::function<Eigen::MatrixXd(double t, const Eigen::VectorXd& x, const Eigen::MatrixXd& ens)>;
/// d x d Jacobian of column `col` of a diffusion matrix w.r.t. x.
using SpaceJacobianFn =
    std::function<Eigen::MatrixXd(double t, const Eigen::VectorXd& x, const Eigen::MatrixXd& ens, int col)>;
/// d x d measure derivative of column `col`, evaluated at atom y.
using MeasureDerivativeFn = std::function<Eigen::MatrixXd(
    double t, const Eigen::VectorXd& x, const Eigen::MatrixXd& ens, const Eigen::VectorXd& y, int col)>;
/// Pathwise exact solution given the driving noise values at time t.
using ClosedFormFn = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x0,
                                                   const Eigen::VectorXd& w1, const Eigen::VectorXd& w0)>;

/// Coefficients b, sigma1, sigma0 and their derivatives. A null derivative
/// callback means "identically zero" and lets the stepper skip the term; a
/// null sigma0 requires m0 == 0. Lipschitz/Hoelder regularity is a user
/// obligation (see probe_lipschitz for an advisory spot check).
struct ModelSpec {
  int d = 1;
  int m1 = 1;
  int m0 = 0;
  DriftFn drift;
  DiffusionFn sigma1;
  DiffusionFn sigma0;
  SpaceJacobianFn dx_sigma1;
  SpaceJacobianFn dx_sigma0;
  MeasureDerivativeFn dmu_sigma1;
  MeasureDerivativeFn dmu_sigma0;
  bool commutative = false;  // asserts the pairwise commutation identity for sigma1
  ClosedFormFn closed_form;
  std::string name;

  bool has_common_noise() const { return m0 > 0; }
  bool has_measure_derivatives() const {
    return static_cast<bool>(dmu_sigma1) || static_cast<bool>(dmu_sigma0);
  }
};

/// Model library addressable by name:
///   gbm(a, nu)                     dX = a X dt + nu X dW, closed form attached
///   mvou(kappa, sigma[, sigma0])   dX = kappa(mean - X) dt + sigma dW [+ sigma0 dW0]
///   nonsmooth_conv(alpha, beta, nu)
///       b(x, mu) = -alpha|x| - (beta/N) sum_k |x - y_k|,  sigma1 = nu x
///   kuramoto_common(beta, sigma, sigma0)
///       b(x, mu) = (beta/N) sum_k sin(y_k - x), constant diffusions
/// Unknown names, missing or unknown parameters are errors.
ModelSpec builtin_model(const std::string& name, const std::map<std::string, double>& params);

/// Arithmetic mean of the ensemble rows, in fixed index order.
Eigen::VectorXd ensemble_mean(const Eigen::MatrixXd& ens);

/// Advisory empirical Lipschitz ratios over sampled argument pairs:
/// max |coef(x,mu) - coef(x',mu')| / (|x - x'| + W2(mu, mu')).
struct LipschitzReport {
  double drift = 0.0;
  double sigma1 = 0.0;
  double sigma0 = 0.0;  // 0 when m0 == 0
  int samples = 0;
};
LipschitzReport probe_lipschitz(const ModelSpec& model, int sample_count, double radius,
                                std::uint64_t seed);

}  // namespace rmil
