#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace rmil {

/// Temporal mesh 0 = t_0 < t_1 < ... < t_n = T with h_max <= min(1, T).
class TimeGrid {
 public:
  /// Validates and takes ownership of the node vector.
  explicit TimeGrid(Eigen::VectorXd times) : times_(std::move(times)) {
    if (times_.size() < 2) throw std::invalid_argument("TimeGrid: need at least two nodes");
    if (times_[0] != 0.0) throw std::invalid_argument("TimeGrid: times must start at 0");
    steps_.resize(times_.size() - 1);
    for (Eigen::Index j = 0; j + 1 < times_.size(); ++j) {
      steps_[j] = times_[j + 1] - times_[j];
      if (!(steps_[j] > 0.0)) throw std::invalid_argument("TimeGrid: times must be strictly increasing");
    }
    h_max_ = steps_.maxCoeff();
    const double T = horizon();
    if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
    if (h_max_ > std::min(1.0, T) * (1.0 + 1e-12))
      throw std::invalid_argument("TimeGrid: max step exceeds min(1, T)");
  }

  /// n+1 equidistant nodes on [0, T].
  static TimeGrid uniform(double T, int n) {
    if (!(T > 0.0)) throw std::invalid_argument("TimeGrid::uniform: T must be positive");
    if (n < 1) throw std::invalid_argument("TimeGrid::uniform: n must be >= 1");
    Eigen::VectorXd t(n + 1);
    for (int j = 0; j <= n; ++j) t[j] = T * static_cast<double>(j) / n;
    return TimeGrid(std::move(t));
  }

  const Eigen::VectorXd& times() const { return times_; }
  const Eigen::VectorXd& steps() const { return steps_; }
  int num_steps() const { return static_cast<int>(steps_.size()); }
  double time(int j) const { return times_[j]; }
  double step(int j) const { return steps_[j]; }  // h_j for step j in 0..n-1
  double h_max() const { return h_max_; }
  double horizon() const { return times_[times_.size() - 1]; }

  bool is_uniform(double rel_tol = 1e-12) const {
    return (steps_.maxCoeff() - steps_.minCoeff()) <= rel_tol * h_max_;
  }

  bool operator==(const TimeGrid& other) const { return times_ == other.times_; }

 private:
  Eigen::VectorXd times_;
  Eigen::VectorXd steps_;
  double h_max_ = 0.0;
};

/// make_uniform_grid(T, n) from the public surface; alias of TimeGrid::uniform.
inline TimeGrid make_uniform_grid(double T, int n) { return TimeGrid::uniform(T, n); }

}  // namespace rmil
