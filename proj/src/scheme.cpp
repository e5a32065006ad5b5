#include "rmil/scheme.hpp"

#include <stdexcept>

#include "rmil/parallel.hpp"

namespace rmil {

std::string to_string(SchemeKind k) { return k == SchemeKind::euler ? "euler" : "milstein"; }

std::string to_string(MilsteinMode m) {
  switch (m) {
    case MilsteinMode::automatic: return "auto";
    case MilsteinMode::full: return "full";
    case MilsteinMode::drop_measure_terms: return "drop_measure_terms";
    case MilsteinMode::commutative: return "commutative";
  }
  return "?";
}

MilsteinMode resolve_mode(const ModelSpec& model, MilsteinMode requested, int N) {
  if (requested == MilsteinMode::commutative) {
    if (model.m0 > 0)
      throw std::invalid_argument(
          "milstein: commutative mode requires m0 == 0 (common noise present)");
    if (!model.commutative)
      throw std::invalid_argument("milstein: model does not declare the commutation identity");
    return requested;
  }
  if (requested == MilsteinMode::automatic)
    return N > 64 ? MilsteinMode::drop_measure_terms : MilsteinMode::full;
  return requested;
}

namespace {

void check_shapes(const ModelSpec& model, const NoiseBundle& bundle, const Eigen::MatrixXd& ens) {
  if (ens.cols() != model.d) throw std::invalid_argument("scheme: ensemble dimension mismatch");
  if (ens.rows() != bundle.particles()) throw std::invalid_argument("scheme: particle count mismatch");
  if (bundle.m1() != model.m1 || bundle.m0() != model.m0)
    throw std::invalid_argument("scheme: noise dimension mismatch");
  if (model.m0 > 0 && !model.sigma0)
    throw std::invalid_argument("scheme: m0 > 0 but sigma0 is not set");
}

// Data shared by all particle rows of one step.
struct StepShared {
  double t, h, eta, t_eta;
  Eigen::VectorXd dw0;          // coarse common increment
  Eigen::VectorXd dw0_partial;  // common increment up to the randomised point
  bool measure_terms = false;
  std::vector<Eigen::MatrixXd> sig1_all, sig0_all;  // per-particle columns, for measure terms
};

StepShared make_shared_data(const ModelSpec& model, const NoiseBundle& bundle, int j,
                            const Eigen::MatrixXd& ens, MilsteinMode mode) {
  StepShared s;
  s.t = bundle.grid().time(j);
  s.h = bundle.grid().step(j);
  s.eta = bundle.eta(j);
  s.t_eta = s.t + s.eta * s.h;
  if (model.m0 > 0) {
    s.dw0 = bundle.increment_vector(j, NoiseId::common());
    s.dw0_partial = internal_increment(bundle, j, NoiseId::common());
  }
  s.measure_terms = mode == MilsteinMode::full && model.has_measure_derivatives();
  if (s.measure_terms) {
    const int N = static_cast<int>(ens.rows());
    s.sig1_all.reserve(N);
    if (model.m0 > 0) s.sig0_all.reserve(N);
    for (int k = 0; k < N; ++k) {
      const Eigen::VectorXd xk = ens.row(k).transpose();
      s.sig1_all.push_back(model.sigma1(s.t, xk, ens));
      if (model.m0 > 0) s.sig0_all.push_back(model.sigma0(s.t, xk, ens));
    }
  }
  return s;
}

void predictor_rows(const ModelSpec& model, const NoiseBundle& bundle, int j,
                    const Eigen::MatrixXd& ens, const StepShared& s, int lo, int hi,
                    Eigen::MatrixXd& out) {
  for (int i = lo; i < hi; ++i) {
    const Eigen::VectorXd x = ens.row(i).transpose();
    Eigen::VectorXd next = x + s.eta * s.h * model.drift(s.t, x, ens);
    next += model.sigma1(s.t, x, ens) * internal_increment(bundle, j, NoiseId::particle(i));
    if (model.m0 > 0) next += model.sigma0(s.t, x, ens) * s.dw0_partial;
    out.row(i) = next.transpose();
  }
}

// Writes the scheme increment Gamma_j for rows [lo, hi).
void corrector_rows(const ModelSpec& model, const NoiseBundle& bundle, int j,
                    const Eigen::MatrixXd& ens, const Eigen::MatrixXd& pred, const StepShared& s,
                    MilsteinMode mode, int lo, int hi, Eigen::MatrixXd& out) {
  const int N = static_cast<int>(ens.rows());
  for (int i = lo; i < hi; ++i) {
    const Eigen::VectorXd x = ens.row(i).transpose();
    const NoiseId wi = NoiseId::particle(i);
    Eigen::VectorXd v = s.h * model.drift(s.t_eta, pred.row(i).transpose(), pred);

    const Eigen::MatrixXd s1 = model.sigma1(s.t, x, ens);
    const Eigen::VectorXd dw = bundle.increment_vector(j, wi);
    v += s1 * dw;

    if (mode == MilsteinMode::commutative) {
      // Reduced update: pairwise increment products replace iterated integrals.
      if (model.dx_sigma1) {
        for (int l = 0; l < model.m1; ++l) {
          const Eigen::MatrixXd dxs = model.dx_sigma1(s.t, x, ens, l);
          for (int l1 = 0; l1 < model.m1; ++l1)
            v += dxs * s1.col(l1) * (0.5 * (dw[l] * dw[l1] - (l == l1 ? s.h : 0.0)));
        }
      }
      out.row(i) = v.transpose();
      continue;
    }

    if (model.m0 > 0) v += model.sigma0(s.t, x, ens) * s.dw0;

    for (int u = 1; u >= 0; --u) {
      if (u == 0 && model.m0 == 0) continue;
      const int mu_dim = u == 1 ? model.m1 : model.m0;
      const NoiseId target = u == 1 ? wi : NoiseId::common();
      const auto& dx_sigma = u == 1 ? model.dx_sigma1 : model.dx_sigma0;
      const auto& dmu_sigma = u == 1 ? model.dmu_sigma1 : model.dmu_sigma0;
      for (int l = 0; l < mu_dim; ++l) {
        if (dx_sigma) {
          const Eigen::MatrixXd dxs = dx_sigma(s.t, x, ens, l);
          for (int l1 = 0; l1 < model.m1; ++l1)
            v += dxs * s1.col(l1) * iterated_integral(bundle, j, wi, l1, target, l);
          if (model.m0 > 0) {
            const Eigen::MatrixXd s0 = model.sigma0(s.t, x, ens);
            for (int l1 = 0; l1 < model.m0; ++l1)
              v += dxs * s0.col(l1) * iterated_integral(bundle, j, NoiseId::common(), l1, target, l);
          }
        }
        if (s.measure_terms && dmu_sigma) {
          for (int k = 0; k < N; ++k) {
            const Eigen::MatrixXd dmu = dmu_sigma(s.t, x, ens, ens.row(k).transpose(), l);
            for (int l1 = 0; l1 < model.m1; ++l1)
              v += dmu * s.sig1_all[k].col(l1) *
                   (iterated_integral(bundle, j, NoiseId::particle(k), l1, target, l) / N);
            if (model.m0 > 0) {
              for (int l1 = 0; l1 < model.m0; ++l1)
                v += dmu * s.sig0_all[k].col(l1) *
                     (iterated_integral(bundle, j, NoiseId::common(), l1, target, l) / N);
            }
          }
        }
      }
    }
    out.row(i) = v.transpose();
  }
}

void euler_rows(const ModelSpec& model, const NoiseBundle& bundle, int j,
                const Eigen::MatrixXd& ens, const StepShared& s, int lo, int hi,
                Eigen::MatrixXd& out) {
  for (int i = lo; i < hi; ++i) {
    const Eigen::VectorXd x = ens.row(i).transpose();
    Eigen::VectorXd v = x + s.h * model.drift(s.t, x, ens);
    v += model.sigma1(s.t, x, ens) * bundle.increment_vector(j, NoiseId::particle(i));
    if (model.m0 > 0) v += model.sigma0(s.t, x, ens) * s.dw0;
    out.row(i) = v.transpose();
  }
}

}  // namespace

Eigen::MatrixXd predictor_step(const ModelSpec& model, const NoiseBundle& bundle, int j,
                               const Eigen::MatrixXd& ens) {
  check_shapes(model, bundle, ens);
  const StepShared s = make_shared_data(model, bundle, j, ens, MilsteinMode::drop_measure_terms);
  Eigen::MatrixXd pred(ens.rows(), model.d);
  predictor_rows(model, bundle, j, ens, s, 0, static_cast<int>(ens.rows()), pred);
  return pred;
}

Eigen::MatrixXd milstein_increment(const ModelSpec& model, const NoiseBundle& bundle, int j,
                                   const Eigen::MatrixXd& ens, MilsteinMode mode,
                                   Eigen::MatrixXd* predictor_out) {
  check_shapes(model, bundle, ens);
  const int N = static_cast<int>(ens.rows());
  mode = resolve_mode(model, mode, N);
  const StepShared s = make_shared_data(model, bundle, j, ens, mode);

  Eigen::MatrixXd pred(N, model.d);
  predictor_rows(model, bundle, j, ens, s, 0, N, pred);
  if (predictor_out) *predictor_out = pred;

  Eigen::MatrixXd inc(N, model.d);
  corrector_rows(model, bundle, j, ens, pred, s, mode, 0, N, inc);
  return inc;
}

Eigen::MatrixXd milstein_step(const ModelSpec& model, const NoiseBundle& bundle, int j,
                              const Eigen::MatrixXd& ens, MilsteinMode mode) {
  return ens + milstein_increment(model, bundle, j, ens, mode);
}

Eigen::MatrixXd euler_step(const ModelSpec& model, const NoiseBundle& bundle, int j,
                           const Eigen::MatrixXd& ens) {
  check_shapes(model, bundle, ens);
  const StepShared s = make_shared_data(model, bundle, j, ens, MilsteinMode::drop_measure_terms);
  Eigen::MatrixXd next(ens.rows(), model.d);
  euler_rows(model, bundle, j, ens, s, 0, static_cast<int>(ens.rows()), next);
  return next;
}

Trajectory simulate(const ModelSpec& model, const NoiseBundle& bundle,
                    const Eigen::MatrixXd& initial, SchemeKind scheme, MilsteinMode mode,
                    int workers, bool keep_predictors) {
  check_shapes(model, bundle, initial);
  if (!initial.allFinite()) throw std::invalid_argument("simulate: initial ensemble must be finite");
  const int n = bundle.grid().num_steps();
  const int N = static_cast<int>(initial.rows());
  if (scheme == SchemeKind::milstein) mode = resolve_mode(model, mode, N);

  Trajectory traj(bundle.grid());
  traj.scheme = scheme;
  traj.mode = mode;
  traj.frames.resize(n + 1);
  traj.frames[0] = initial;
  const bool keep = keep_predictors && scheme == SchemeKind::milstein;
  if (keep) traj.predictors.resize(n);

  for (int j = 0; j < n; ++j) {
    const Eigen::MatrixXd& prev = traj.frames[j];
    if (traj.diverged) {
      traj.frames[j + 1] = prev;  // no further dynamics after divergence
      if (keep) traj.predictors[j] = prev;
      continue;
    }
    const StepShared s = make_shared_data(model, bundle, j, prev, mode);
    Eigen::MatrixXd next(N, model.d);

    if (scheme == SchemeKind::euler) {
      parallel_for_blocks(N, workers,
                          [&](int lo, int hi) { euler_rows(model, bundle, j, prev, s, lo, hi, next); });
    } else {
      // Predictor barrier: the predictor empirical measure must be complete
      // before any corrector row is evaluated.
      Eigen::MatrixXd pred(N, model.d);
      parallel_for_blocks(
          N, workers, [&](int lo, int hi) { predictor_rows(model, bundle, j, prev, s, lo, hi, pred); });
      parallel_for_blocks(N, workers, [&](int lo, int hi) {
        corrector_rows(model, bundle, j, prev, pred, s, mode, lo, hi, next);
      });
      next += prev;
      if (keep) traj.predictors[j] = std::move(pred);
    }

    if (!next.allFinite()) {
      traj.diverged = true;
      traj.diverged_step = j + 1;
    }
    traj.frames[j + 1] = std::move(next);
  }
  return traj;
}

}  // namespace rmil
