#include "rmil/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "rmil/metrics.hpp"
#include "rmil/noise.hpp"
#include "rmil/parallel.hpp"
#include "rmil/philox.hpp"

namespace rmil {

int default_substeps(double h) { return std::max(1, static_cast<int>(std::ceil(1.0 / h))); }

FitResult fit_order(const std::vector<std::pair<double, double>>& levels) {
  FitResult fit;
  std::vector<std::pair<double, double>> usable;
  for (const auto& [scale, error] : levels) {
    if (!(scale > 0.0)) {
      fit.warning += "excluded level with nonpositive scale; ";
      continue;
    }
    if (!(error > 0.0) || !std::isfinite(error)) {
      fit.warning += "excluded level with nonpositive error; ";
      continue;
    }
    usable.emplace_back(std::log2(scale), std::log2(error));
  }
  fit.used_levels = static_cast<int>(usable.size());
  if (usable.size() < 3) {
    fit.warning += "fewer than 3 usable levels, slope undefined";
    return fit;
  }
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : usable) {
    mx += x;
    my += y;
  }
  mx /= usable.size();
  my /= usable.size();
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : usable) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  fit.valid = true;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (const auto& [x, y] : usable) {
    const double r = y - (fit.intercept + fit.slope * x);
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / usable.size());
  // observed order per adjacent pair, in the stored level order
  std::sort(usable.begin(), usable.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t k = 0; k + 1 < usable.size(); ++k) {
    const double dx = usable[k].first - usable[k + 1].first;
    fit.pair_orders.push_back((usable[k].second - usable[k + 1].second) / dx);
  }
  return fit;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> sorted_desc(std::vector<double> v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

// Per-level Monte Carlo statistics: a list of M-row matrices whose aggregate
// is the level's error estimate.
struct LevelData {
  double scale = 0.0;
  std::vector<Eigen::MatrixXd> stats;
};

using Aggregator = std::function<double(const std::vector<Eigen::MatrixXd>&)>;

// Deterministic replicate bootstrap shared across levels: per-level standard
// errors plus a 95% percentile interval for the fitted slope.
void aggregate_with_bootstrap(StudyReport& report, const std::vector<LevelData>& levels,
                              const Aggregator& aggregate, double /*q*/, int M, int resamples,
                              std::uint64_t seed) {
  std::vector<double> estimates;
  estimates.reserve(levels.size());
  for (const auto& lv : levels) estimates.push_back(aggregate(lv.stats));

  report.levels.clear();
  for (std::size_t l = 0; l < levels.size(); ++l)
    report.levels.push_back({levels[l].scale, estimates[l], 0.0, M});

  std::vector<std::pair<double, double>> fit_input;
  for (std::size_t l = 0; l < levels.size(); ++l)
    fit_input.emplace_back(levels[l].scale, estimates[l]);
  report.fit = fit_order(fit_input);

  if (resamples <= 0 || M < 2) return;

  std::vector<std::vector<double>> boot_est(levels.size());
  std::vector<double> boot_slopes;
  std::vector<int> idx(M);
  std::vector<Eigen::MatrixXd> resampled;
  for (int b = 0; b < resamples; ++b) {
    for (int r = 0; r < M; ++r) {
      const double u = uniform_open(seed, 0,
                                    {StreamKind::bootstrap, 0, static_cast<std::uint64_t>(b),
                                     static_cast<std::uint64_t>(r), 0, 0});
      idx[r] = std::min(M - 1, static_cast<int>(u * M));
    }
    std::vector<std::pair<double, double>> boot_fit_input;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      resampled.clear();
      for (const auto& s : levels[l].stats) {
        Eigen::MatrixXd rs(s.rows(), s.cols());
        for (int r = 0; r < M; ++r) rs.row(r) = s.row(idx[r]);
        resampled.push_back(std::move(rs));
      }
      const double est = aggregate(resampled);
      boot_est[l].push_back(est);
      boot_fit_input.emplace_back(levels[l].scale, est);
    }
    const FitResult bf = fit_order(boot_fit_input);
    if (bf.valid) boot_slopes.push_back(bf.slope);
  }

  for (std::size_t l = 0; l < levels.size(); ++l) {
    double mean = 0.0;
    for (double e : boot_est[l]) mean += e;
    mean /= boot_est[l].size();
    double var = 0.0;
    for (double e : boot_est[l]) var += (e - mean) * (e - mean);
    report.levels[l].std_error = std::sqrt(var / boot_est[l].size());
  }
  if (boot_slopes.size() >= 20) {
    std::sort(boot_slopes.begin(), boot_slopes.end());
    const auto pick = [&](double p) {
      const auto k = static_cast<std::size_t>(p * (boot_slopes.size() - 1));
      return boot_slopes[k];
    };
    report.slope_lo = pick(0.025);
    report.slope_hi = pick(0.975);
  }
}

Aggregator sup_aggregator(double q) {
  return [q](const std::vector<Eigen::MatrixXd>& stats) { return lq_max_aggregate(stats[0], q); };
}

Aggregator spijker_aggregator(double q) {
  return [q](const std::vector<Eigen::MatrixXd>& stats) {
    return lq_max_aggregate(stats[0], q) + lq_max_aggregate(stats[1], q);
  };
}

Aggregator mean_aggregator() {
  return [](const std::vector<Eigen::MatrixXd>& stats) { return stats[0].mean(); };
}

void record_divergence(StudyReport& report, const std::vector<char>& diverged) {
  for (std::size_t r = 0; r < diverged.size(); ++r) {
    if (diverged[r]) {
      report.any_divergence = true;
      report.diverged_replicates.push_back(static_cast<int>(r));
    }
  }
}

// Node values of every driving noise path: cumulative sums of the coarse
// increments, as consumed by closed-form oracles.
void node_noise_values(const NoiseBundle& bundle, int i, Eigen::MatrixXd& w1, Eigen::MatrixXd& w0) {
  const int n = bundle.grid().num_steps();
  w1.setZero(n + 1, bundle.m1());
  for (int j = 0; j < n; ++j)
    w1.row(j + 1) = w1.row(j) + bundle.increment_vector(j, NoiseId::particle(i)).transpose();
  if (bundle.m0() > 0) {
    w0.setZero(n + 1, bundle.m0());
    for (int j = 0; j < n; ++j)
      w0.row(j + 1) = w0.row(j) + bundle.increment_vector(j, NoiseId::common()).transpose();
  } else {
    w0.resize(n + 1, 0);
  }
}

}  // namespace

StudyReport strong_convergence_study(const ModelSpec& model, double T, int N,
                                     const std::vector<double>& h_levels, double h_ref, int M,
                                     SchemeKind scheme, std::uint64_t seed,
                                     const StudyOptions& opts) {
  const auto start = Clock::now();
  if (M < 2) throw std::invalid_argument("strong_convergence_study: M must be >= 2");
  if (h_levels.empty()) throw std::invalid_argument("strong_convergence_study: no h levels");
  const std::vector<double> hs = sorted_desc(h_levels);
  const bool closed = static_cast<bool>(model.closed_form);
  const double h_min = hs.back();

  std::vector<int> level_n(hs.size());
  for (std::size_t l = 0; l < hs.size(); ++l) {
    const double n_exact = T / hs[l];
    level_n[l] = static_cast<int>(std::llround(n_exact));
    if (level_n[l] < 1 || std::abs(n_exact - level_n[l]) > 1e-9)
      throw std::invalid_argument("strong_convergence_study: h level does not divide T");
  }

  int n_ref = 0;
  std::vector<int> factors(hs.size(), 1);
  if (!closed) {
    if (!(h_ref > 0.0)) throw std::invalid_argument("strong_convergence_study: h_ref required without closed form");
    const double n_exact = T / h_ref;
    n_ref = static_cast<int>(std::llround(n_exact));
    if (n_ref < 1 || std::abs(n_exact - n_ref) > 1e-9)
      throw std::invalid_argument("strong_convergence_study: h_ref does not divide T");
    for (std::size_t l = 0; l < hs.size(); ++l) {
      const double ratio = hs[l] / h_ref;
      factors[l] = static_cast<int>(std::llround(ratio));
      if (factors[l] < 1 || std::abs(ratio - factors[l]) > 1e-9 || n_ref % factors[l] != 0)
        throw std::invalid_argument("strong_convergence_study: levels not nested over h_ref");
    }
  }
  // Coupled-branch master substeps: keep every coarsened level at or above
  // the ceil(1/h) policy (factor * K_master >= 1/h <=> K_master >= h_ref/h^2).
  const int K_master =
      opts.K > 0 ? opts.K
                 : std::clamp(static_cast<int>(std::ceil(h_ref / (h_min * h_min))), 1, 256);

  std::vector<LevelData> levels(hs.size());
  for (std::size_t l = 0; l < hs.size(); ++l) {
    levels[l].scale = hs[l];
    levels[l].stats.assign(1, Eigen::MatrixXd::Zero(M, N));
  }
  std::vector<char> diverged(M, 0);

  parallel_for(M, opts.workers, [&](int r) {
    const auto rep = static_cast<std::uint64_t>(r);
    const Eigen::MatrixXd initial =
        gaussian_initial_ensemble(N, model.d, opts.x0, opts.x0_std, seed, rep);
    if (closed) {
      Eigen::MatrixXd w1, w0;
      for (std::size_t l = 0; l < hs.size(); ++l) {
        const TimeGrid grid = TimeGrid::uniform(T, level_n[l]);
        const int K = opts.K > 0 ? opts.K : default_substeps(hs[l]);
        const NoiseBundle bundle = sample_noise(grid, N, model.m1, model.m0, K, seed, rep);
        const Trajectory traj = simulate(model, bundle, initial, scheme, opts.mode);
        if (traj.diverged) diverged[r] = 1;
        for (int i = 0; i < N; ++i) {
          node_noise_values(bundle, i, w1, w0);
          double worst = 0.0;
          for (int j = 1; j <= level_n[l]; ++j) {
            const Eigen::VectorXd exact =
                model.closed_form(grid.time(j), initial.row(i).transpose(),
                                  w1.row(j).transpose(), w0.row(j).transpose());
            worst = std::max(worst, (exact - traj.frames[j].row(i).transpose()).norm());
          }
          levels[l].stats[0](r, i) = worst;
        }
      }
    } else {
      const NoiseBundle master =
          sample_noise(TimeGrid::uniform(T, n_ref), N, model.m1, model.m0, K_master, seed, rep);
      const Trajectory ref = simulate(model, master, initial, scheme, opts.mode);
      if (ref.diverged) diverged[r] = 1;
      for (std::size_t l = 0; l < hs.size(); ++l) {
        const NoiseBundle bundle = coarsen(master, factors[l]);
        const Trajectory traj = simulate(model, bundle, initial, scheme, opts.mode);
        if (traj.diverged) diverged[r] = 1;
        for (int i = 0; i < N; ++i) {
          double worst = 0.0;
          for (int j = 0; j <= level_n[l]; ++j)
            worst = std::max(worst, (ref.frames[static_cast<std::size_t>(j) * factors[l]].row(i) -
                                     traj.frames[j].row(i))
                                        .norm());
          levels[l].stats[0](r, i) = worst;
        }
      }
    }
  });

  StudyReport report;
  report.kind = "convergence";
  report.seed = seed;
  report.replicates = M;
  record_divergence(report, diverged);
  aggregate_with_bootstrap(report, levels, sup_aggregator(opts.q), opts.q, M,
                           opts.bootstrap_resamples, seed);
  report.wall_seconds = elapsed_seconds(start);
  return report;
}

StudyReport quadrature_study(QuadIntegrand family, double T, const std::vector<double>& h_levels,
                             int M, std::uint64_t seed, const StudyOptions& opts) {
  const auto start = Clock::now();
  if (M < 2) throw std::invalid_argument("quadrature_study: M must be >= 2");
  if (h_levels.empty()) throw std::invalid_argument("quadrature_study: no h levels");
  const std::vector<double> hs = sorted_desc(h_levels);

  std::vector<LevelData> levels(hs.size());
  for (std::size_t l = 0; l < hs.size(); ++l) {
    levels[l].scale = hs[l];
    levels[l].stats.assign(1, Eigen::MatrixXd::Zero(M, 1));
  }

  parallel_for(M, opts.workers, [&](int r) {
    for (std::size_t l = 0; l < hs.size(); ++l) {
      const double n_exact = T / hs[l];
      const int n = static_cast<int>(std::llround(n_exact));
      if (n < 1 || std::abs(n_exact - n) > 1e-9)
        throw std::invalid_argument("quadrature_study: h level does not divide T");
      const TimeGrid grid = TimeGrid::uniform(T, n);
      const QuadratureRun run = quadrature_run(family, grid, seed, static_cast<std::uint64_t>(r));
      levels[l].stats[0](r, 0) = (run.theta - run.exact).cwiseAbs().maxCoeff();
    }
  });

  StudyReport report;
  report.kind = "quadrature";
  report.seed = seed;
  report.replicates = M;
  aggregate_with_bootstrap(report, levels, sup_aggregator(opts.q), opts.q, M,
                           opts.bootstrap_resamples, seed);
  report.wall_seconds = elapsed_seconds(start);
  return report;
}

StudyReport consistency_study(const ModelSpec& model, double T, int N,
                              const std::vector<double>& h_levels, double h_ref, int M,
                              std::uint64_t seed, const StudyOptions& opts) {
  const auto start = Clock::now();
  if (M < 1) throw std::invalid_argument("consistency_study: M must be >= 1");
  if (!(h_ref > 0.0)) throw std::invalid_argument("consistency_study: h_ref required");
  const std::vector<double> hs = sorted_desc(h_levels);
  const double h_min = hs.back();

  const double n_exact = T / h_ref;
  const int n_ref = static_cast<int>(std::llround(n_exact));
  if (n_ref < 1 || std::abs(n_exact - n_ref) > 1e-9)
    throw std::invalid_argument("consistency_study: h_ref does not divide T");
  std::vector<int> factors(hs.size());
  for (std::size_t l = 0; l < hs.size(); ++l) {
    const double ratio = hs[l] / h_ref;
    factors[l] = static_cast<int>(std::llround(ratio));
    if (factors[l] < 1 || std::abs(ratio - factors[l]) > 1e-9 || n_ref % factors[l] != 0)
      throw std::invalid_argument("consistency_study: levels not nested over h_ref");
  }
  const int K_master =
      opts.K > 0 ? opts.K
                 : std::clamp(static_cast<int>(std::ceil(h_ref / (h_min * h_min))), 1, 256);

  std::vector<LevelData> levels(hs.size());
  for (std::size_t l = 0; l < hs.size(); ++l) {
    levels[l].scale = hs[l];
    levels[l].stats.assign(2, Eigen::MatrixXd::Zero(M, N));
  }
  std::vector<char> diverged(M, 0);

  parallel_for(M, opts.workers, [&](int r) {
    const auto rep = static_cast<std::uint64_t>(r);
    const Eigen::MatrixXd initial =
        gaussian_initial_ensemble(N, model.d, opts.x0, opts.x0_std, seed, rep);
    const NoiseBundle master =
        sample_noise(TimeGrid::uniform(T, n_ref), N, model.m1, model.m0, K_master, seed, rep);
    const Trajectory ref = simulate(model, master, initial, SchemeKind::milstein, opts.mode);
    if (ref.diverged) diverged[r] = 1;
    for (std::size_t l = 0; l < hs.size(); ++l) {
      const NoiseBundle bundle = coarsen(master, factors[l]);
      Trajectory nodes(bundle.grid());
      nodes.frames.resize(bundle.grid().num_steps() + 1);
      for (int j = 0; j <= bundle.grid().num_steps(); ++j)
        nodes.frames[j] = ref.frames[static_cast<std::size_t>(j) * factors[l]];
      GridProcessSample res = residuals(model, bundle, nodes, opts.mode);
      res.q = opts.q;
      const auto [head, tail] = spijker_stats(res);
      levels[l].stats[0].row(r) = head.row(0);
      levels[l].stats[1].row(r) = tail.row(0);
    }
  });

  StudyReport report;
  report.kind = "consistency";
  report.seed = seed;
  report.replicates = M;
  record_divergence(report, diverged);
  aggregate_with_bootstrap(report, levels, spijker_aggregator(opts.q), opts.q, M,
                           opts.bootstrap_resamples, seed);
  report.wall_seconds = elapsed_seconds(start);
  return report;
}

namespace {

// Exact 1-D W2 between equal-weight ensembles whose sizes divide: replicate
// each coarse atom to equal size, then use the monotone coupling.
double w2_terminal_nested(const Eigen::MatrixXd& coarse, const Eigen::MatrixXd& fine) {
  const int n_c = static_cast<int>(coarse.rows());
  const int n_f = static_cast<int>(fine.rows());
  const int rep = n_f / n_c;
  Eigen::MatrixXd blown(n_f, 1);
  std::vector<double> xs(coarse.col(0).data(), coarse.col(0).data() + n_c);
  std::sort(xs.begin(), xs.end());
  for (int i = 0; i < n_c; ++i)
    for (int k = 0; k < rep; ++k) blown(i * rep + k, 0) = xs[i];
  return w2_sorted_1d(blown, fine);
}

}  // namespace

StudyReport poc_study(const ModelSpec& model, double T, double h, const std::vector<int>& N_levels,
                      int N_ref, int M, std::uint64_t seed, const StudyOptions& opts) {
  const auto start = Clock::now();
  if (model.d != 1) throw std::invalid_argument("poc_study: supports d = 1 only");
  if (M < 1) throw std::invalid_argument("poc_study: M must be >= 1");
  if (N_levels.empty()) throw std::invalid_argument("poc_study: no N levels");
  std::vector<int> ns = N_levels;
  std::sort(ns.begin(), ns.end());
  for (int nl : ns) {
    if (nl < 1) throw std::invalid_argument("poc_study: N levels must be positive");
    if (N_ref <= nl) throw std::invalid_argument("poc_study: N_ref must exceed every N level");
    if (N_ref % nl != 0) throw std::invalid_argument("poc_study: every N level must divide N_ref");
  }
  const double n_exact = T / h;
  const int n = static_cast<int>(std::llround(n_exact));
  if (n < 1 || std::abs(n_exact - n) > 1e-9)
    throw std::invalid_argument("poc_study: h does not divide T");
  const int K = opts.K > 0 ? opts.K : default_substeps(h);
  const TimeGrid grid = TimeGrid::uniform(T, n);

  std::vector<LevelData> levels(ns.size());
  for (std::size_t l = 0; l < ns.size(); ++l) {
    levels[l].scale = static_cast<double>(ns[l]);
    levels[l].stats.assign(1, Eigen::MatrixXd::Zero(M, 1));
  }
  std::vector<char> diverged(M, 0);

  // Stream 1 carries the level systems (nested across N by construction),
  // stream 2 the independent reference; the common noise is stream-invariant.
  parallel_for(M, opts.workers, [&](int r) {
    const auto rep = static_cast<std::uint64_t>(r);
    const NoiseBundle ref_bundle = sample_noise(grid, N_ref, model.m1, model.m0, K, seed, rep, 2);
    const Eigen::MatrixXd ref_init =
        gaussian_initial_ensemble(N_ref, model.d, opts.x0, opts.x0_std, seed, rep, 2);
    const Trajectory ref = simulate(model, ref_bundle, ref_init, SchemeKind::milstein, opts.mode);
    if (ref.diverged) diverged[r] = 1;
    const Eigen::MatrixXd& ref_terminal = ref.frames.back();
    for (std::size_t l = 0; l < ns.size(); ++l) {
      const NoiseBundle bundle = sample_noise(grid, ns[l], model.m1, model.m0, K, seed, rep, 1);
      const Eigen::MatrixXd init =
          gaussian_initial_ensemble(ns[l], model.d, opts.x0, opts.x0_std, seed, rep, 1);
      const Trajectory traj = simulate(model, bundle, init, SchemeKind::milstein, opts.mode);
      if (traj.diverged) diverged[r] = 1;
      levels[l].stats[0](r, 0) = w2_terminal_nested(traj.frames.back(), ref_terminal);
    }
  });

  StudyReport report;
  report.kind = "poc";
  report.seed = seed;
  report.replicates = M;
  record_divergence(report, diverged);
  aggregate_with_bootstrap(report, levels, mean_aggregator(), opts.q, M, opts.bootstrap_resamples,
                           seed);
  report.monotone_decreasing = true;
  for (std::size_t l = 0; l + 1 < report.levels.size(); ++l)
    if (!(report.levels[l].error > report.levels[l + 1].error)) report.monotone_decreasing = false;
  report.wall_seconds = elapsed_seconds(start);
  return report;
}

StudyReport moment_stability_check(const ModelSpec& model, double T, int N,
                                   const std::vector<double>& h_levels, int M, double p,
                                   std::uint64_t seed, const StudyOptions& opts) {
  const auto start = Clock::now();
  if (p < 2.0) throw std::invalid_argument("moment_stability_check: p must be >= 2");
  if (M < 1) throw std::invalid_argument("moment_stability_check: M must be >= 1");
  const std::vector<double> hs = sorted_desc(h_levels);

  std::vector<LevelData> levels(hs.size());
  for (std::size_t l = 0; l < hs.size(); ++l) {
    levels[l].scale = hs[l];
    levels[l].stats.assign(1, Eigen::MatrixXd::Zero(M, N));
  }
  std::vector<char> diverged(M, 0);

  parallel_for(M, opts.workers, [&](int r) {
    const auto rep = static_cast<std::uint64_t>(r);
    const Eigen::MatrixXd initial =
        gaussian_initial_ensemble(N, model.d, opts.x0, opts.x0_std, seed, rep);
    for (std::size_t l = 0; l < hs.size(); ++l) {
      const double n_exact = T / hs[l];
      const int n = static_cast<int>(std::llround(n_exact));
      if (n < 1 || std::abs(n_exact - n) > 1e-9)
        throw std::invalid_argument("moment_stability_check: h level does not divide T");
      const TimeGrid grid = TimeGrid::uniform(T, n);
      const int K = opts.K > 0 ? opts.K : default_substeps(hs[l]);
      const NoiseBundle bundle = sample_noise(grid, N, model.m1, model.m0, K, seed, rep);
      const Trajectory traj = simulate(model, bundle, initial, SchemeKind::milstein, opts.mode);
      if (traj.diverged) diverged[r] = 1;
      for (int i = 0; i < N; ++i) {
        double worst = 0.0;
        for (const auto& frame : traj.frames) worst = std::max(worst, frame.row(i).norm());
        levels[l].stats[0](r, i) = worst;
      }
    }
  });

  StudyReport report;
  report.kind = "moments";
  report.seed = seed;
  report.replicates = M;
  record_divergence(report, diverged);
  aggregate_with_bootstrap(report, levels, sup_aggregator(p), p, M, opts.bootstrap_resamples, seed);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  bool finite = true;
  for (const auto& lv : report.levels) {
    if (!std::isfinite(lv.error)) finite = false;
    lo = std::min(lo, lv.error);
    hi = std::max(hi, lv.error);
  }
  report.max_rel_spread = (finite && lo > 0.0) ? (hi - lo) / lo
                                               : std::numeric_limits<double>::quiet_NaN();
  report.stable = finite && !report.any_divergence &&
                  (lo == hi || report.max_rel_spread < 0.20);
  report.wall_seconds = elapsed_seconds(start);
  return report;
}

}  // namespace rmil
