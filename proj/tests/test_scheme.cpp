#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rmil/scheme.hpp"

using namespace rmil;

namespace {

ModelSpec zero_model() {
  ModelSpec m;
  m.d = 1;
  m.m1 = 1;
  m.commutative = true;
  m.drift = [](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
    return Eigen::VectorXd::Zero(1);
  };
  m.sigma1 = [](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
    return Eigen::MatrixXd::Zero(1, 1);
  };
  return m;
}

ModelSpec constant_model(double b, double s1, double s0 = 0.0, bool with_common = false) {
  ModelSpec m;
  m.d = 1;
  m.m1 = 1;
  m.m0 = with_common ? 1 : 0;
  m.commutative = true;
  m.drift = [b](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
    return Eigen::VectorXd{{b}};
  };
  m.sigma1 = [s1](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
    return Eigen::MatrixXd{{s1}};
  };
  if (with_common) {
    m.sigma0 = [s0](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
      return Eigen::MatrixXd{{s0}};
    };
  }
  return m;
}

}  // namespace

TEST_CASE("predictor with zero coefficients is the identity") {
  const ModelSpec m = zero_model();
  const TimeGrid g = make_uniform_grid(1.0, 4);
  const NoiseBundle b = sample_noise(g, 3, 1, 0, 2, 1, 0);
  Eigen::MatrixXd ens(3, 1);
  ens << 1.0, -2.0, 0.5;
  CHECK(predictor_step(m, b, 0, ens) == ens);
}

TEST_CASE("predictor drift displacement: b = 1, eta = 0.5, h = 0.25") {
  const ModelSpec m = constant_model(1.0, 0.0);
  const TimeGrid g = make_uniform_grid(1.0, 4);
  NoiseBundle b = sample_noise(g, 1, 1, 0, 2, 1, 0);
  b = b.with_etas(Eigen::VectorXd::Constant(4, 0.5));
  Eigen::MatrixXd ens(1, 1);
  ens << 2.0;
  const Eigen::MatrixXd pred = predictor_step(m, b, 0, ens);
  CHECK(pred(0, 0) == doctest::Approx(2.0 + 0.125).epsilon(1e-15));
}

TEST_CASE("gbm predictor matches the direct formula") {
  const double a = 0.5, nu = 0.3;
  const ModelSpec m = builtin_model("gbm", {{"a", a}, {"nu", nu}});
  const TimeGrid g = make_uniform_grid(1.0, 4);
  const NoiseBundle b = sample_noise(g, 1, 1, 0, 4, 3, 1);
  Eigen::MatrixXd ens(1, 1);
  ens << 1.5;
  const double x = ens(0, 0);
  const int j = 2;
  const double dwp = internal_increment(b, j, NoiseId::particle(0))[0];
  const double expected = x + b.eta(j) * g.step(j) * a * x + nu * x * dwp;
  CHECK(predictor_step(m, b, j, ens)(0, 0) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("milstein with constant diffusion reduces to x + c dW") {
  const ModelSpec m = constant_model(0.0, 0.7);
  const TimeGrid g = make_uniform_grid(1.0, 4);
  const NoiseBundle b = sample_noise(g, 2, 1, 0, 2, 5, 0);
  Eigen::MatrixXd ens(2, 1);
  ens << 1.0, -1.0;
  const Eigen::MatrixXd next = milstein_step(m, b, 1, ens, MilsteinMode::full);
  for (int i = 0; i < 2; ++i)
    CHECK(next(i, 0) == ens(i, 0) + 0.7 * b.increment(1, NoiseId::particle(i), 0));
}

TEST_CASE("gbm milstein step carries the diagonal correction") {
  const double a = 0.5, nu = 0.3;
  const ModelSpec m = builtin_model("gbm", {{"a", a}, {"nu", nu}});
  const TimeGrid g = make_uniform_grid(1.0, 8);
  const NoiseBundle b = sample_noise(g, 1, 1, 0, 2, 11, 2);
  Eigen::MatrixXd ens(1, 1);
  ens << 0.8;
  const int j = 3;
  const double x = ens(0, 0);
  const double h = g.step(j);
  const double dw = b.increment(j, NoiseId::particle(0), 0);
  const double pred = predictor_step(m, b, j, ens)(0, 0);
  const double expected = x + h * a * pred + nu * x * dw + nu * nu * x * 0.5 * (dw * dw - h);
  CHECK(milstein_step(m, b, j, ens, MilsteinMode::full)(0, 0) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("full and drop_measure_terms agree bitwise when the measure derivative vanishes") {
  const TimeGrid g = make_uniform_grid(1.0, 4);
  const NoiseBundle b = sample_noise(g, 4, 1, 1, 2, 13, 0);
  Eigen::MatrixXd ens(4, 1);
  ens << 0.2, -0.4, 1.0, 0.6;

  // builtin with no measure-derivative callbacks
  const ModelSpec mvou = builtin_model("mvou", {{"kappa", 1.0}, {"sigma", 0.4}, {"sigma0", 0.2}});
  CHECK(milstein_step(mvou, b, 0, ens, MilsteinMode::full) ==
        milstein_step(mvou, b, 0, ens, MilsteinMode::drop_measure_terms));

  // explicit measure derivative that is identically zero
  ModelSpec withzero = mvou;
  withzero.dmu_sigma1 = [](double, const Eigen::VectorXd&, const Eigen::MatrixXd&,
                           const Eigen::VectorXd&, int) { return Eigen::MatrixXd::Zero(1, 1); };
  CHECK(milstein_step(withzero, b, 0, ens, MilsteinMode::full) ==
        milstein_step(withzero, b, 0, ens, MilsteinMode::drop_measure_terms));
}

TEST_CASE("commutative mode matches the full update for d = m1 = 1") {
  const ModelSpec m = builtin_model("gbm", {{"a", 0.2}, {"nu", 0.5}});
  const TimeGrid g = make_uniform_grid(1.0, 8);
  const NoiseBundle b = sample_noise(g, 3, 1, 0, 4, 19, 0);
  Eigen::MatrixXd ens(3, 1);
  ens << 1.0, 2.0, 0.3;
  for (int j = 0; j < 8; ++j) {
    const Eigen::MatrixXd full = milstein_step(m, b, j, ens, MilsteinMode::full);
    const Eigen::MatrixXd comm = milstein_step(m, b, j, ens, MilsteinMode::commutative);
    CHECK(full == comm);
  }
}

TEST_CASE("commutative mode is rejected with common noise") {
  const ModelSpec m =
      builtin_model("kuramoto_common", {{"beta", 1.0}, {"sigma", 0.1}, {"sigma0", 0.1}});
  const TimeGrid g = make_uniform_grid(1.0, 2);
  const NoiseBundle b = sample_noise(g, 2, 1, 1, 2, 1, 0);
  Eigen::MatrixXd ens = Eigen::MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(milstein_step(m, b, 0, ens, MilsteinMode::commutative), std::invalid_argument);
}

TEST_CASE("euler step displacement and identity") {
  const TimeGrid g = make_uniform_grid(1.0, 4);
  const NoiseBundle b = sample_noise(g, 1, 1, 0, 2, 23, 0);
  Eigen::MatrixXd ens(1, 1);
  ens << 0.0;
  CHECK(euler_step(zero_model(), b, 0, ens) == ens);
  const Eigen::MatrixXd next = euler_step(constant_model(1.0, 0.0), b, 0, ens);
  CHECK(next(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("simulate keeps a zero-coefficient system constant") {
  const TimeGrid g = make_uniform_grid(1.0, 8);
  const NoiseBundle b = sample_noise(g, 3, 1, 0, 2, 29, 0);
  Eigen::MatrixXd init(3, 1);
  init << 1.0, 2.0, 3.0;
  const Trajectory traj = simulate(zero_model(), b, init, SchemeKind::milstein);
  for (const auto& frame : traj.frames) CHECK(frame == init);
  CHECK(!traj.diverged);
}

TEST_CASE("affine-in-noise exactness: terminal = initial + summed increments") {
  const ModelSpec m = constant_model(0.0, 0.4, 0.3, true);
  const TimeGrid g = make_uniform_grid(1.0, 16);
  const NoiseBundle b = sample_noise(g, 2, 1, 1, 2, 31, 0);
  Eigen::MatrixXd init(2, 1);
  init << 1.0, -1.0;
  for (const SchemeKind scheme : {SchemeKind::euler, SchemeKind::milstein}) {
    const Trajectory traj = simulate(m, b, init, scheme);
    for (int i = 0; i < 2; ++i) {
      double expect = init(i, 0);
      for (int j = 0; j < 16; ++j) {
        expect += 0.4 * b.increment(j, NoiseId::particle(i), 0);
        expect += 0.3 * b.increment(j, NoiseId::common(), 0);
      }
      CHECK(traj.frames.back()(i, 0) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("euler on the fine and coarsened bundle agree for additive noise") {
  // b = 0 with constant sigma: both reduce to the running increment sum.
  const ModelSpec m = constant_model(0.0, 0.8);
  const TimeGrid g = make_uniform_grid(1.0, 16);
  const NoiseBundle fine = sample_noise(g, 2, 1, 0, 2, 59, 0);
  const NoiseBundle coarse = coarsen(fine, 4);
  Eigen::MatrixXd init(2, 1);
  init << 0.5, -0.5;
  const Trajectory tf = simulate(m, fine, init, SchemeKind::euler);
  const Trajectory tc = simulate(m, coarse, init, SchemeKind::euler);
  for (int i = 0; i < 2; ++i)
    CHECK(tf.frames.back()(i, 0) == doctest::Approx(tc.frames.back()(i, 0)).epsilon(1e-13));
}

TEST_CASE("gbm closed form solves the SDE: fine euler agrees to O(sqrt h)") {
  const double a = 0.5, nu = 0.3;
  const ModelSpec m = builtin_model("gbm", {{"a", a}, {"nu", nu}});
  const int n = 1 << 14;
  const TimeGrid g = make_uniform_grid(1.0, n);
  Eigen::MatrixXd init(1, 1);
  init << 1.0;
  double acc = 0.0;
  const int paths = 40;
  for (std::uint64_t rep = 0; rep < paths; ++rep) {
    const NoiseBundle b = sample_noise(g, 1, 1, 0, 1, 73, rep);
    const Trajectory traj = simulate(m, b, init, SchemeKind::euler);
    double w = 0.0;
    for (int j = 0; j < n; ++j) w += b.increment(j, NoiseId::particle(0), 0);
    const double exact = std::exp((a - 0.5 * nu * nu) + nu * w);
    acc += (traj.frames.back()(0, 0) - exact) * (traj.frames.back()(0, 0) - exact);
  }
  CHECK(std::sqrt(acc / paths) < 0.01);  // O(sqrt h) at h = 2^-14
}

TEST_CASE("single particle path matches an independent scalar reference") {
  // Hand-rolled scalar randomised Milstein for gbm, mirroring the update
  // term by term from the bundle's stored draws.
  const double a = 0.5, nu = 0.3;
  const ModelSpec m = builtin_model("gbm", {{"a", a}, {"nu", nu}});
  const TimeGrid g = make_uniform_grid(1.0, 32);
  const NoiseBundle b = sample_noise(g, 1, 1, 0, 4, 37, 5);
  Eigen::MatrixXd init(1, 1);
  init << 1.0;
  const Trajectory traj = simulate(m, b, init, SchemeKind::milstein);

  double x = 1.0;
  for (int j = 0; j < 32; ++j) {
    const double h = g.step(j);
    const double eta = b.eta(j);
    const double dwp = internal_increment(b, j, NoiseId::particle(0))[0];
    const double dw = b.increment(j, NoiseId::particle(0), 0);
    const double pred = x + eta * h * a * x + nu * x * dwp;
    x = x + h * a * pred + nu * x * dw + nu * nu * x * 0.5 * (dw * dw - h);
    CHECK(traj.frames[j + 1](0, 0) == doctest::Approx(x).epsilon(1e-13));
  }
}

TEST_CASE("worker count does not change the trajectory bits") {
  const ModelSpec m =
      builtin_model("nonsmooth_conv", {{"alpha", 0.5}, {"beta", 0.5}, {"nu", 0.3}});
  const TimeGrid g = make_uniform_grid(1.0, 16);
  const NoiseBundle b = sample_noise(g, 12, 1, 0, 4, 41, 0);
  const Eigen::MatrixXd init = Eigen::MatrixXd::Constant(12, 1, 1.0);
  const Trajectory t1 = simulate(m, b, init, SchemeKind::milstein, MilsteinMode::automatic, 1);
  const Trajectory t8 = simulate(m, b, init, SchemeKind::milstein, MilsteinMode::automatic, 8);
  REQUIRE(t1.frames.size() == t8.frames.size());
  for (std::size_t j = 0; j < t1.frames.size(); ++j) CHECK(t1.frames[j] == t8.frames[j]);
}

TEST_CASE("a particle's update sees the ensemble as an unordered measure") {
  const TimeGrid g = make_uniform_grid(1.0, 2);
  const NoiseBundle b = sample_noise(g, 3, 1, 0, 2, 43, 0);
  Eigen::MatrixXd ens(3, 1), permuted(3, 1);
  ens << 0.5, -1.0, 2.0;
  permuted << 0.5, 2.0, -1.0;  // row 0 fixed, others swapped

  // Euler consumes the measure only at t_{j-1}.
  const ModelSpec conv =
      builtin_model("nonsmooth_conv", {{"alpha", 0.4}, {"beta", 0.6}, {"nu", 0.2}});
  const double e = euler_step(conv, b, 0, ens)(0, 0);
  const double ep = euler_step(conv, b, 0, permuted)(0, 0);
  CHECK(e == doctest::Approx(ep).epsilon(1e-13));

  // Milstein with drift 0: the corrector reads the measure only through the
  // t_{j-1} coefficients. (With a drift, the predictor measure pairs states
  // with noise streams, so row permutations must permute the noise too.)
  ModelSpec meandiff;
  meandiff.d = 1;
  meandiff.m1 = 1;
  meandiff.drift = [](double, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
    return Eigen::VectorXd::Zero(1);
  };
  meandiff.sigma1 = [](double, const Eigen::VectorXd& x, const Eigen::MatrixXd& e) {
    return Eigen::MatrixXd{{0.1 * x[0] * (1.0 + std::abs(e.col(0).mean()))}};
  };
  meandiff.dx_sigma1 = [](double, const Eigen::VectorXd&, const Eigen::MatrixXd& e, int) {
    return Eigen::MatrixXd{{0.1 * (1.0 + std::abs(e.col(0).mean()))}};
  };
  const double v = milstein_step(meandiff, b, 0, ens, MilsteinMode::full)(0, 0);
  const double vp = milstein_step(meandiff, b, 0, permuted, MilsteinMode::full)(0, 0);
  CHECK(v == doctest::Approx(vp).epsilon(1e-13));
}

TEST_CASE("non-finite values flag the run as diverged") {
  ModelSpec cubic = zero_model();
  cubic.drift = [](double, const Eigen::VectorXd& x, const Eigen::MatrixXd&) {
    return Eigen::VectorXd{{x[0] * x[0] * x[0]}};
  };
  const TimeGrid g = make_uniform_grid(1.0, 64);
  const NoiseBundle b = sample_noise(g, 1, 1, 0, 1, 47, 0);
  Eigen::MatrixXd init(1, 1);
  init << 40.0;  // x^3 h > x doubles every step and overflows
  const Trajectory traj = simulate(cubic, b, init, SchemeKind::euler);
  CHECK(traj.diverged);
  CHECK(traj.diverged_step >= 1);
  CHECK(traj.frames.size() == 65);
}

TEST_CASE("predictor frames are retained on request") {
  const ModelSpec m = builtin_model("gbm", {{"a", 0.1}, {"nu", 0.2}});
  const TimeGrid g = make_uniform_grid(1.0, 4);
  const NoiseBundle b = sample_noise(g, 2, 1, 0, 2, 53, 0);
  const Eigen::MatrixXd init = Eigen::MatrixXd::Constant(2, 1, 1.0);
  const Trajectory plain = simulate(m, b, init, SchemeKind::milstein);
  CHECK(plain.predictors.empty());
  const Trajectory kept =
      simulate(m, b, init, SchemeKind::milstein, MilsteinMode::automatic, 1, true);
  REQUIRE(kept.predictors.size() == 4);
  CHECK(kept.predictors[0] == predictor_step(m, b, 0, init));
}
