#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmil/metrics.hpp"
#include "rmil/model.hpp"
#include "rmil/noise.hpp"
#include "rmil/philox.hpp"
#include "rmil/scheme.hpp"

using namespace rmil;

namespace {

Eigen::MatrixXd ens1d(std::initializer_list<double> xs) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) e(i++, 0) = x;
  return e;
}

// Exhaustive search over all couplings; the independent oracle for w2.
double w2_brute_force(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  std::vector<int> perm(a.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int i = 0; i < a.rows(); ++i) cost += (a.row(i) - b.row(perm[i])).squaredNorm();
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / a.rows());
}

Eigen::MatrixXd random_ensemble(int n, int d, std::uint64_t seed, std::uint64_t tag) {
  Eigen::MatrixXd e(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      e(i, c) = 4.0 * uniform_open(seed, tag,
                                   {StreamKind::probe, 9, static_cast<std::uint64_t>(i),
                                    static_cast<std::uint64_t>(c), 0, 0}) -
                2.0;
  return e;
}

}  // namespace

TEST_CASE("w2 basics") {
  const Eigen::MatrixXd a = ens1d({0.3, -1.0, 2.0});
  CHECK(w2(a, a) == 0.0);
  CHECK(w2(ens1d({1.0}), ens1d({4.0})) == doctest::Approx(3.0));
  // brute force over both couplings of {0,2} vs {1,3}: monotone wins with 1
  const Eigen::MatrixXd x = ens1d({0.0, 2.0});
  const Eigen::MatrixXd y = ens1d({1.0, 3.0});
  CHECK(w2_brute_force(x, y) == doctest::Approx(1.0));
  CHECK(w2(x, y) == doctest::Approx(1.0));
}

TEST_CASE("w2 argument validation") {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 1);
  const Eigen::MatrixXd b2 = Eigen::MatrixXd::Zero(3, 2);
  const Eigen::MatrixXd a4 = Eigen::MatrixXd::Zero(4, 1);
  CHECK_THROWS_AS(w2(a, b2), std::invalid_argument);
  CHECK_THROWS_AS(w2(a, a4), std::invalid_argument);
  const Eigen::MatrixXd big = Eigen::MatrixXd::Zero(20, 2);
  CHECK_THROWS_AS(w2(big, big), std::invalid_argument);
  CHECK(w2_assignment(big, big) == 0.0);  // explicit opt-in beyond the cap
}

TEST_CASE("sorted 1-d coupling equals the assignment solver") {
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + t % 7;  // N <= 8
    const Eigen::MatrixXd a = random_ensemble(n, 1, 101, 2 * t);
    const Eigen::MatrixXd b = random_ensemble(n, 1, 101, 2 * t + 1);
    CHECK(std::abs(w2_sorted_1d(a, b) - w2_assignment(a, b)) <= 1e-12);
  }
}

TEST_CASE("assignment solver equals brute force in d = 2") {
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t % 5;  // N <= 6 keeps the factorial oracle cheap
    const Eigen::MatrixXd a = random_ensemble(n, 2, 202, 2 * t);
    const Eigen::MatrixXd b = random_ensemble(n, 2, 202, 2 * t + 1);
    CHECK(w2(a, b) == doctest::Approx(w2_brute_force(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("w2 metric properties on random triples") {
  for (int t = 0; t < 40; ++t) {
    const Eigen::MatrixXd a = random_ensemble(6, 1, 303, 3 * t);
    const Eigen::MatrixXd b = random_ensemble(6, 1, 303, 3 * t + 1);
    const Eigen::MatrixXd c = random_ensemble(6, 1, 303, 3 * t + 2);
    const double ab = w2(a, b), ba = w2(b, a), ac = w2(a, c), cb = w2(c, b);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
    CHECK(ab >= 0.0);
    CHECK(ab <= ac + cb + 1e-12);
  }
}

TEST_CASE("grid sup norm") {
  GridProcessSample s;
  s.N = 1;
  s.d = 1;
  s.q = 2.0;
  s.values.push_back(Eigen::MatrixXd::Zero(3, 1));
  CHECK(grid_sup_norm(s) == 0.0);

  s.values[0] << 1.0, -3.0, 2.0;
  CHECK(grid_sup_norm(s) == doctest::Approx(3.0));

  GridProcessSample two;
  two.N = 1;
  two.d = 1;
  two.q = 2.0;
  two.values.push_back(Eigen::MatrixXd::Constant(1, 1, 3.0));
  two.values.push_back(Eigen::MatrixXd::Constant(1, 1, 4.0));
  CHECK(grid_sup_norm(two) == doctest::Approx(std::sqrt(12.5)));

  GridProcessSample empty;
  CHECK_THROWS_AS(grid_sup_norm(empty), std::invalid_argument);
}

TEST_CASE("spijker norm") {
  GridProcessSample s;
  s.N = 1;
  s.d = 1;
  s.q = 2.0;
  s.values.push_back(Eigen::MatrixXd::Zero(4, 1));
  CHECK(spijker_norm(s) == 0.0);

  s.values[0] << 0.0, 1.0, -1.0, 1.0;  // partial sums 1, 0, 1
  CHECK(spijker_norm(s) == doctest::Approx(1.0));

  s.values[0] << 2.0, 0.0, 0.0, 0.0;
  CHECK(spijker_norm(s) == doctest::Approx(2.0));
}

TEST_CASE("grid norms are positively homogeneous") {
  GridProcessSample s;
  s.N = 2;
  s.d = 1;
  s.q = 2.0;
  Eigen::MatrixXd v(4, 2);
  v << 0.5, -1.0, 2.0, 0.25, -0.75, 1.5, 0.0, -2.0;
  s.values.push_back(v);
  s.values.push_back(0.5 * v);
  GridProcessSample scaled = s;
  for (auto& m : scaled.values) m *= 3.0;
  CHECK(grid_sup_norm(scaled) == doctest::Approx(3.0 * grid_sup_norm(s)).epsilon(1e-14));
  CHECK(spijker_norm(scaled) == doctest::Approx(3.0 * spijker_norm(s)).epsilon(1e-14));
}

TEST_CASE("the scheme is the zero of its own residual map") {
  const ModelSpec m =
      builtin_model("nonsmooth_conv", {{"alpha", 0.5}, {"beta", 0.5}, {"nu", 0.3}});
  const TimeGrid g = make_uniform_grid(1.0, 16);
  const NoiseBundle b = sample_noise(g, 5, 1, 0, 4, 61, 0);
  const Eigen::MatrixXd init = Eigen::MatrixXd::Constant(5, 1, 1.0);
  const Trajectory traj = simulate(m, b, init, SchemeKind::milstein, MilsteinMode::full);
  const GridProcessSample r = residuals(m, b, traj, MilsteinMode::full);
  for (const auto& frame : r.values) CHECK(frame.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("residuals of a perturbed trajectory, recomputed directly") {
  const ModelSpec m = builtin_model("gbm", {{"a", 0.3}, {"nu", 0.2}});
  const TimeGrid g = make_uniform_grid(0.5, 2);
  const NoiseBundle b = sample_noise(g, 2, 1, 0, 2, 67, 0);
  const Eigen::MatrixXd init = Eigen::MatrixXd::Constant(2, 1, 1.0);
  Trajectory traj = simulate(m, b, init, SchemeKind::milstein, MilsteinMode::full);

  const double c = 0.125;
  traj.frames[1].array() += c;  // interior shift at j0 = 1

  const GridProcessSample r = residuals(m, b, traj, MilsteinMode::full);
  // R_1 gains exactly +c (Gamma_1 still uses the unshifted frame 0)
  for (int i = 0; i < 2; ++i) CHECK(r.values[0](1, i) == doctest::Approx(c).epsilon(1e-12));
  // R_2 = Y_2 - Y_1 - Gamma_2(Y_1): recompute from the increment map
  const Eigen::MatrixXd gamma2 = milstein_increment(m, b, 1, traj.frames[1], MilsteinMode::full);
  for (int i = 0; i < 2; ++i) {
    const double expect = traj.frames[2](i, 0) - (traj.frames[1](i, 0) + gamma2(i, 0));
    CHECK(r.values[0](2, i) == expect);
  }
  // R_0 is measured against the supplied initial ensemble
  const GridProcessSample r0 = residuals(m, b, traj, MilsteinMode::full, &init);
  CHECK(r0.values[0].row(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero-coefficient residuals telescope the trajectory") {
  ModelSpec zero;
  zero.d = 1;
  zero.m1 = 1;
  zero.commutative = true;
  zero.drift = [](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
    return Eigen::VectorXd::Zero(1);
  };
  zero.sigma1 = [](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
    return Eigen::MatrixXd::Zero(1, 1);
  };
  const TimeGrid g = make_uniform_grid(1.0, 3);
  const NoiseBundle b = sample_noise(g, 1, 1, 0, 1, 71, 0);
  Trajectory traj(g);
  traj.frames = {ens1d({1.0}), ens1d({2.5}), ens1d({-0.5}), ens1d({0.0})};
  const GridProcessSample r = residuals(zero, b, traj, MilsteinMode::full);
  CHECK(r.values[0](1, 0) == 2.5 - 1.0);
  CHECK(r.values[0](2, 0) == -0.5 - 2.5);
  CHECK(r.values[0](3, 0) == 0.0 - -0.5);
}
