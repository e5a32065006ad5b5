#include "rmil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rmil/model.hpp"
#include "rmil/noise.hpp"
#include "rmil/scheme.hpp"

namespace rmil {

namespace {

void check_pair(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool same_rows) {
  if (a.cols() != b.cols()) throw std::invalid_argument("w2: dimension mismatch");
  if (same_rows && a.rows() != b.rows())
    throw std::invalid_argument("w2: equal-weight empirical measures need equal atom counts");
  if (a.rows() < 1 || b.rows() < 1) throw std::invalid_argument("w2: empty ensemble");
}

}  // namespace

double w2_sorted_1d(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_pair(a, b, true);
  if (a.cols() != 1) throw std::invalid_argument("w2_sorted_1d: requires d = 1");
  std::vector<double> xs(a.col(0).data(), a.col(0).data() + a.rows());
  std::vector<double> ys(b.col(0).data(), b.col(0).data() + b.rows());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double acc = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double diff = xs[k] - ys[k];
    acc += diff * diff;
  }
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  // Hungarian algorithm with row/column potentials, O(n^3).
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("solve_assignment: square matrix required");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double w2_assignment(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_pair(a, b, true);
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  const std::vector<int> match = solve_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost(i, match[i]);
  return std::sqrt(total / n);
}

double w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_pair(a, b, true);
  if (a.cols() == 1) return w2_sorted_1d(a, b);
  if (a.rows() <= kAssignmentCap) return w2_assignment(a, b);
  throw std::invalid_argument(
      "w2: exact assignment beyond N = 12 must be requested explicitly via w2_assignment");
}

Eigen::MatrixXd sup_norm_stats(const GridProcessSample& sample) {
  if (sample.replicates() < 1) throw std::invalid_argument("grid norm: empty sample");
  const int M = sample.replicates();
  const int N = sample.N;
  const int d = sample.d;
  Eigen::MatrixXd stats(M, N);
  for (int r = 0; r < M; ++r) {
    const Eigen::MatrixXd& y = sample.values[r];
    for (int i = 0; i < N; ++i) {
      double m = 0.0;
      for (Eigen::Index j = 0; j < y.rows(); ++j)
        m = std::max(m, y.row(j).segment(i * d, d).norm());
      stats(r, i) = m;
    }
  }
  return stats;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> spijker_stats(const GridProcessSample& sample) {
  if (sample.replicates() < 1) throw std::invalid_argument("grid norm: empty sample");
  const int M = sample.replicates();
  const int N = sample.N;
  const int d = sample.d;
  Eigen::MatrixXd head(M, N), tail(M, N);
  Eigen::VectorXd acc(d);
  for (int r = 0; r < M; ++r) {
    const Eigen::MatrixXd& y = sample.values[r];
    for (int i = 0; i < N; ++i) {
      head(r, i) = y.row(0).segment(i * d, d).norm();
      acc.setZero();
      double m = 0.0;
      for (Eigen::Index j = 1; j < y.rows(); ++j) {
        acc += y.row(j).segment(i * d, d).transpose();
        m = std::max(m, acc.norm());
      }
      tail(r, i) = m;
    }
  }
  return {std::move(head), std::move(tail)};
}

double lq_max_aggregate(const Eigen::MatrixXd& stats, double q) {
  if (stats.rows() < 1) throw std::invalid_argument("lq_max_aggregate: empty statistics");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < stats.cols(); ++i) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < stats.rows(); ++r) acc += std::pow(stats(r, i), q);
    worst = std::max(worst, std::pow(acc / static_cast<double>(stats.rows()), 1.0 / q));
  }
  return worst;
}

double grid_sup_norm(const GridProcessSample& sample) {
  return lq_max_aggregate(sup_norm_stats(sample), sample.q);
}

double spijker_norm(const GridProcessSample& sample) {
  const auto [head, tail] = spijker_stats(sample);
  return lq_max_aggregate(head, sample.q) + lq_max_aggregate(tail, sample.q);
}

GridProcessSample residuals(const ModelSpec& model, const NoiseBundle& bundle,
                            const Trajectory& traj, MilsteinMode mode,
                            const Eigen::MatrixXd* x0_ref) {
  if (!(traj.grid == bundle.grid()))
    throw std::invalid_argument("residuals: trajectory and bundle grids differ");
  const int n = bundle.grid().num_steps();
  if (static_cast<int>(traj.frames.size()) != n + 1)
    throw std::invalid_argument("residuals: frame count does not match the grid");
  const int N = static_cast<int>(traj.frames[0].rows());
  const int d = model.d;

  GridProcessSample sample;
  sample.N = N;
  sample.d = d;
  Eigen::MatrixXd values(n + 1, N * d);
  const Eigen::MatrixXd r0 = traj.frames[0] - (x0_ref ? *x0_ref : traj.frames[0]);
  for (int i = 0; i < N; ++i) values.row(0).segment(i * d, d) = r0.row(i);
  for (int j = 1; j <= n; ++j) {
    const Eigen::MatrixXd gamma = milstein_increment(model, bundle, j - 1, traj.frames[j - 1], mode);
    // Associated as Y_j - (Y_{j-1} + Gamma) so a trajectory produced by the
    // scheme itself cancels bitwise.
    const Eigen::MatrixXd r = traj.frames[j] - (traj.frames[j - 1] + gamma);
    for (int i = 0; i < N; ++i) values.row(j).segment(i * d, d) = r.row(i);
  }
  sample.values.push_back(std::move(values));
  return sample;
}

}  // namespace rmil
