#include "rmil/model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "rmil/metrics.hpp"
#include "rmil/philox.hpp"

namespace rmil {

namespace {

double require(const std::map<std::string, double>& params, const std::string& model,
               const std::string& key) {
  auto it = params.find(key);
  if (it == params.end())
    throw std::invalid_argument("builtin_model " + model + ": missing parameter '" + key + "'");
  return it->second;
}

void reject_unknown(const std::map<std::string, double>& params, const std::string& model,
                    const std::set<std::string>& known) {
  for (const auto& [key, value] : params) {
    (void)value;
    if (!known.count(key))
      throw std::invalid_argument("builtin_model " + model + ": unknown parameter '" + key + "'");
  }
}

ModelSpec make_gbm(const std::map<std::string, double>& params) {
  reject_unknown(params, "gbm", {"a", "nu"});
  const double a = require(params, "gbm", "a");
  const double nu = require(params, "gbm", "nu");
  ModelSpec m;
  m.name = "gbm";
  m.d = 1;
  m.m1 = 1;
  m.m0 = 0;
  m.commutative = true;
  m.drift = [a](double, const Eigen::VectorXd& x, const Eigen::MatrixXd&) {
    return Eigen::VectorXd{{a * x[0]}};
  };
  m.sigma1 = [nu](double, const Eigen::VectorXd& x, const Eigen::MatrixXd&) {
    return Eigen::MatrixXd{{nu * x[0]}};
  };
  m.dx_sigma1 = [nu](double, const Eigen::VectorXd&, const Eigen::MatrixXd&, int) {
    return Eigen::MatrixXd{{nu}};
  };
  m.closed_form = [a, nu](double t, const Eigen::VectorXd& x0, const Eigen::VectorXd& w1,
                          const Eigen::VectorXd&) {
    return Eigen::VectorXd{{x0[0] * std::exp((a - 0.5 * nu * nu) * t + nu * w1[0])}};
  };
  return m;
}

ModelSpec make_mvou(const std::map<std::string, double>& params) {
  reject_unknown(params, "mvou", {"kappa", "sigma", "sigma0"});
  const double kappa = require(params, "mvou", "kappa");
  const double sigma = require(params, "mvou", "sigma");
  const bool common = params.count("sigma0") > 0;
  const double sigma0 = common ? params.at("sigma0") : 0.0;
  ModelSpec m;
  m.name = "mvou";
  m.d = 1;
  m.m1 = 1;
  m.m0 = common ? 1 : 0;
  m.commutative = true;
  m.drift = [kappa](double, const Eigen::VectorXd& x, const Eigen::MatrixXd& ens) {
    return Eigen::VectorXd{{kappa * (ens.col(0).mean() - x[0])}};
  };
  m.sigma1 = [sigma](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
    return Eigen::MatrixXd{{sigma}};
  };
  if (common) {
    m.sigma0 = [sigma0](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
      return Eigen::MatrixXd{{sigma0}};
    };
  }
  return m;
}

ModelSpec make_nonsmooth_conv(const std::map<std::string, double>& params) {
  reject_unknown(params, "nonsmooth_conv", {"alpha", "beta", "nu"});
  const double alpha = require(params, "nonsmooth_conv", "alpha");
  const double beta = require(params, "nonsmooth_conv", "beta");
  const double nu = require(params, "nonsmooth_conv", "nu");
  ModelSpec m;
  m.name = "nonsmooth_conv";
  m.d = 1;
  m.m1 = 1;
  m.m0 = 0;
  m.commutative = true;
  // Lipschitz but non-differentiable drift: g(x) = -|x| both pointwise and as
  // a convolution against the empirical measure.
  m.drift = [alpha, beta](double, const Eigen::VectorXd& x, const Eigen::MatrixXd& ens) {
    const double conv = (ens.col(0).array() - x[0]).abs().mean();
    return Eigen::VectorXd{{-alpha * std::abs(x[0]) - beta * conv}};
  };
  m.sigma1 = [nu](double, const Eigen::VectorXd& x, const Eigen::MatrixXd&) {
    return Eigen::MatrixXd{{nu * x[0]}};
  };
  m.dx_sigma1 = [nu](double, const Eigen::VectorXd&, const Eigen::MatrixXd&, int) {
    return Eigen::MatrixXd{{nu}};
  };
  return m;
}

ModelSpec make_kuramoto_common(const std::map<std::string, double>& params) {
  reject_unknown(params, "kuramoto_common", {"beta", "sigma", "sigma0"});
  const double beta = require(params, "kuramoto_common", "beta");
  const double sigma = require(params, "kuramoto_common", "sigma");
  const double sigma0 = require(params, "kuramoto_common", "sigma0");
  ModelSpec m;
  m.name = "kuramoto_common";
  m.d = 1;
  m.m1 = 1;
  m.m0 = 1;
  m.commutative = true;  // constant diffusions; the commutative *mode* still requires m0 == 0
  m.drift = [beta](double, const Eigen::VectorXd& x, const Eigen::MatrixXd& ens) {
    const double s = (ens.col(0).array() - x[0]).sin().mean();
    return Eigen::VectorXd{{beta * s}};
  };
  m.sigma1 = [sigma](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
    return Eigen::MatrixXd{{sigma}};
  };
  m.sigma0 = [sigma0](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
    return Eigen::MatrixXd{{sigma0}};
  };
  return m;
}

}  // namespace

ModelSpec builtin_model(const std::string& name, const std::map<std::string, double>& params) {
  if (name == "gbm") return make_gbm(params);
  if (name == "mvou") return make_mvou(params);
  if (name == "nonsmooth_conv") return make_nonsmooth_conv(params);
  if (name == "kuramoto_common") return make_kuramoto_common(params);
  throw std::invalid_argument("builtin_model: unknown model '" + name + "'");
}

Eigen::VectorXd ensemble_mean(const Eigen::MatrixXd& ens) {
  if (ens.rows() < 1) throw std::invalid_argument("ensemble_mean: empty ensemble");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(ens.cols());
  for (Eigen::Index i = 0; i < ens.rows(); ++i) mean += ens.row(i).transpose();
  return mean / static_cast<double>(ens.rows());
}

LipschitzReport probe_lipschitz(const ModelSpec& model, int sample_count, double radius,
                                std::uint64_t seed) {
  if (sample_count < 2) throw std::invalid_argument("probe_lipschitz: need sample_count >= 2");
  const int d = model.d;
  const int ens_n = 8;

  auto draw_point = [&](std::uint64_t pair, std::uint32_t which) {
    Eigen::VectorXd x(d);
    for (int c = 0; c < d; ++c)
      x[c] = radius * (2.0 * uniform_open(seed, 0,
                                          {StreamKind::probe, which, pair, 0,
                                           static_cast<std::uint32_t>(c), 0}) -
                       1.0);
    return x;
  };
  auto draw_ensemble = [&](std::uint64_t pair, std::uint32_t which) {
    Eigen::MatrixXd e(ens_n, d);
    for (int i = 0; i < ens_n; ++i)
      for (int c = 0; c < d; ++c)
        e(i, c) = radius * (2.0 * uniform_open(seed, 0,
                                               {StreamKind::probe, which, pair,
                                                static_cast<std::uint64_t>(i + 1),
                                                static_cast<std::uint32_t>(c), 0}) -
                            1.0);
    return e;
  };

  LipschitzReport report;
  report.samples = sample_count;
  for (int s = 0; s < sample_count; ++s) {
    const auto p = static_cast<std::uint64_t>(s);
    const Eigen::VectorXd x = draw_point(p, 1), xp = draw_point(p, 2);
    const Eigen::MatrixXd mu = draw_ensemble(p, 3), mup = draw_ensemble(p, 4);
    const double denom = (x - xp).norm() + w2(mu, mup);
    if (denom <= 0.0) continue;
    report.drift = std::max(report.drift, (model.drift(0.0, x, mu) - model.drift(0.0, xp, mup)).norm() / denom);
    report.sigma1 =
        std::max(report.sigma1, (model.sigma1(0.0, x, mu) - model.sigma1(0.0, xp, mup)).norm() / denom);
    if (model.sigma0)
      report.sigma0 =
          std::max(report.sigma0, (model.sigma0(0.0, x, mu) - model.sigma0(0.0, xp, mup)).norm() / denom);
  }
  return report;
}

}  // namespace rmil
