#include "rmil/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include "rmil/philox.hpp"

namespace rmil {

Eigen::VectorXd randomized_riemann_prefixes(const TimeGrid& grid, const Eigen::VectorXd& etas,
                                            const std::function<double(double)>& integrand) {
  const int n = grid.num_steps();
  if (etas.size() != n) throw std::invalid_argument("randomized_riemann_prefixes: eta size mismatch");
  Eigen::VectorXd theta(n);
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    acc += grid.step(j) * integrand(grid.time(j) + etas[j] * grid.step(j));
    theta[j] = acc;
  }
  return theta;
}

QuadIntegrand parse_quad_integrand(const std::string& name) {
  if (name == "constant") return QuadIntegrand::constant;
  if (name == "linear") return QuadIntegrand::linear;
  if (name == "sine") return QuadIntegrand::sine;
  if (name == "brownian") return QuadIntegrand::brownian;
  throw std::invalid_argument("unknown quadrature integrand '" + name + "'");
}

std::string to_string(QuadIntegrand v) {
  switch (v) {
    case QuadIntegrand::constant: return "constant";
    case QuadIntegrand::linear: return "linear";
    case QuadIntegrand::sine: return "sine";
    case QuadIntegrand::brownian: return "brownian";
  }
  return "?";
}

QuadratureRun quadrature_run(QuadIntegrand family, const TimeGrid& grid, std::uint64_t seed,
                             std::uint64_t replicate) {
  const int n = grid.num_steps();
  const auto tag = static_cast<std::uint32_t>(n);
  Eigen::VectorXd etas(n);
  for (int j = 0; j < n; ++j)
    etas[j] = uniform_open(seed, replicate,
                           {StreamKind::eta, 0, static_cast<std::uint64_t>(j), 0, 0, tag});

  QuadratureRun run;
  run.theta.resize(n);
  run.exact.resize(n);

  if (family == QuadIntegrand::brownian) {
    // Walk the ordered breakpoints t_0 < tau_1 < t_1 < tau_2 < ...; per
    // segment the pair (increment, time integral) is jointly Gaussian and is
    // sampled exactly: dW = sqrt(dt) z1, dA = W dt + dt^{3/2}(z1/2 + z2/(2 sqrt 3)).
    double w = 0.0, area = 0.0, theta = 0.0;
    const double inv2s3 = 1.0 / (2.0 * std::sqrt(3.0));
    for (int j = 0; j < n; ++j) {
      const double h = grid.step(j);
      for (int seg = 0; seg < 2; ++seg) {
        const double dt = seg == 0 ? etas[j] * h : (1.0 - etas[j]) * h;
        const auto js = static_cast<std::uint64_t>(j);
        const auto ss = static_cast<std::uint64_t>(seg);
        const double z1 = normal(seed, replicate, {StreamKind::quad, 0, js, ss, 0, tag});
        const double z2 = normal(seed, replicate, {StreamKind::quad, 0, js, ss, 1, tag});
        const double sq = std::sqrt(dt);
        area += w * dt + sq * dt * (0.5 * z1 + inv2s3 * z2);
        w += sq * z1;
        if (seg == 0) theta += h * w;  // V(tau_j) = W(tau_j)
      }
      run.theta[j] = theta;
      run.exact[j] = area;
    }
    return run;
  }

  std::function<double(double)> v;
  std::function<double(double)> integral;
  switch (family) {
    case QuadIntegrand::constant:
      v = [](double) { return 1.0; };
      integral = [](double t) { return t; };
      break;
    case QuadIntegrand::linear:
      v = [](double t) { return t; };
      integral = [](double t) { return 0.5 * t * t; };
      break;
    case QuadIntegrand::sine:
      v = [](double t) { return std::sin(t); };
      integral = [](double t) { return 1.0 - std::cos(t); };
      break;
    default:
      throw std::logic_error("unreachable");
  }
  run.theta = randomized_riemann_prefixes(grid, etas, v);
  for (int j = 0; j < n; ++j) run.exact[j] = integral(grid.time(j + 1));
  return run;
}

}  // namespace rmil
