#include "rmil/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace rmil {

void NoiseBundle::fill_coarse() {
  const int n = grid_.num_steps();
  coarse_.resize(n, channels());
  for (int c = 0; c < channels(); ++c) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      const std::size_t base = c * stride_ + static_cast<std::size_t>(j) * K_;
      for (int k = 0; k < K_; ++k) acc += (*fine_)[base + k];
      coarse_(j, c) = acc;
    }
  }
}

NoiseBundle sample_noise(const TimeGrid& grid, int N, int m1, int m0, int K, std::uint64_t seed,
                         std::uint64_t replicate, std::uint32_t stream) {
  if (N < 1) throw std::invalid_argument("sample_noise: N must be >= 1");
  if (m1 < 1) throw std::invalid_argument("sample_noise: m1 must be >= 1");
  if (m0 < 0) throw std::invalid_argument("sample_noise: m0 must be >= 0");
  if (K < 1) throw std::invalid_argument("sample_noise: K must be >= 1");

  NoiseBundle b(grid, N, m1, m0, K);
  b.seed_ = seed;
  b.replicate_ = replicate;
  b.stream_ = stream;

  const int n = grid.num_steps();
  b.stride_ = static_cast<std::size_t>(n) * K;
  auto fine = std::make_shared<std::vector<double>>(b.stride_ * b.channels());
  for (int c = 0; c < b.channels(); ++c) {
    const bool common = c >= N * m1;
    const NoiseId id = common ? NoiseId::common() : NoiseId::particle(c / m1);
    const int component = common ? c - N * m1 : c % m1;
    const std::uint64_t src = b.counter_source(id);
    for (int j = 0; j < n; ++j) {
      const double sd = std::sqrt(grid.step(j) / K);
      const std::size_t base = c * b.stride_ + static_cast<std::size_t>(j) * K;
      for (int k = 0; k < K; ++k) {
        (*fine)[base + k] =
            sd * normal(seed, replicate,
                        {StreamKind::gaussian, src, static_cast<std::uint64_t>(j),
                         static_cast<std::uint64_t>(k), static_cast<std::uint32_t>(component), 0});
      }
    }
  }
  b.fine_ = std::move(fine);
  b.fill_coarse();

  b.etas_.resize(n);
  for (int j = 0; j < n; ++j) {
    b.etas_[j] = uniform_open(seed, replicate,
                              {StreamKind::eta, 0, static_cast<std::uint64_t>(j), 0, 0,
                               static_cast<std::uint32_t>(n)});
  }
  return b;
}

NoiseBundle coarsen(const NoiseBundle& bundle, int factor) {
  const int n = bundle.grid_.num_steps();
  if (factor < 1) throw std::invalid_argument("coarsen: factor must be >= 1");
  if (n % factor != 0) throw std::invalid_argument("coarsen: factor must divide the number of steps");
  if (!bundle.grid_.is_uniform()) throw std::invalid_argument("coarsen: requires a uniform grid");
  if (factor == 1) return bundle;

  const int n_out = n / factor;
  NoiseBundle out(TimeGrid::uniform(bundle.grid_.horizon(), n_out), bundle.N_, bundle.m1_,
                  bundle.m0_, bundle.K_ * factor);
  out.seed_ = bundle.seed_;
  out.replicate_ = bundle.replicate_;
  out.stream_ = bundle.stream_;
  out.fine_ = bundle.fine_;  // pure regrouping: same atoms, coarser windows
  out.stride_ = bundle.stride_;
  out.fill_coarse();
  out.etas_.resize(n_out);
  for (int j = 0; j < n_out; ++j) {
    out.etas_[j] = uniform_open(out.seed_, out.replicate_,
                                {StreamKind::eta, 0, static_cast<std::uint64_t>(j), 0, 0,
                                 static_cast<std::uint32_t>(n_out)});
  }
  return out;
}

NoiseBundle NoiseBundle::with_etas(Eigen::VectorXd etas) const {
  if (etas.size() != etas_.size()) throw std::invalid_argument("with_etas: size mismatch");
  NoiseBundle out = *this;
  out.etas_ = std::move(etas);
  return out;
}

Eigen::VectorXd internal_increment(const NoiseBundle& bundle, int j, NoiseId id) {
  const int n = bundle.grid_.num_steps();
  if (j < 0 || j >= n) throw std::out_of_range("internal_increment: step index out of range");
  const int K = bundle.K_;
  const int m = bundle.dim(id);
  const double h = bundle.grid_.step(j);
  const double sub_dt = h / K;

  // Position of the randomised point in substep units.
  const double s = bundle.etas_[j] * K;
  int full = static_cast<int>(s);
  if (full > K) full = K;
  const double lam = s - full;

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
  for (int l = 0; l < m; ++l) {
    const int c = bundle.channel(id, l);
    const std::size_t base = c * bundle.stride_ + static_cast<std::size_t>(j) * K;
    double v = 0.0;
    for (int k = 0; k < full; ++k) v += (*bundle.fine_)[base + k];
    if (lam > 0.0 && full < K) {
      const double straddle = (*bundle.fine_)[base + full];
      const double xi =
          normal(bundle.seed_, bundle.replicate_,
                 {StreamKind::bridge, bundle.counter_source(id), static_cast<std::uint64_t>(j),
                  static_cast<std::uint64_t>(full), static_cast<std::uint32_t>(l),
                  static_cast<std::uint32_t>(n)});
      v += lam * straddle + std::sqrt(lam * (1.0 - lam) * sub_dt) * xi;
    }
    acc[l] = v;
  }
  return acc;
}

namespace {

void check_integral_args(const NoiseBundle& bundle, int j, NoiseId source_a, int l1,
                         NoiseId source_b, int l, int n) {
  if (j < 0 || j >= n) throw std::out_of_range("iterated_integral: step index out of range");
  if (l1 < 0 || l1 >= bundle.dim(source_a) || l < 0 || l >= bundle.dim(source_b))
    throw std::out_of_range("iterated_integral: component out of range");
}

}  // namespace

double iterated_integral_subsampled(const NoiseBundle& bundle, int j, NoiseId source_a, int l1,
                                    NoiseId source_b, int l) {
  check_integral_args(bundle, j, source_a, l1, source_b, l, bundle.grid_.num_steps());
  const int ca = bundle.channel(source_a, l1);
  const int cb = bundle.channel(source_b, l);
  const int K = bundle.K_;
  const std::size_t base_a = ca * bundle.stride_ + static_cast<std::size_t>(j) * K;
  const std::size_t base_b = cb * bundle.stride_ + static_cast<std::size_t>(j) * K;
  double prefix_a = 0.0;
  double acc = 0.0;
  for (int k = 0; k < K; ++k) {
    acc += prefix_a * (*bundle.fine_)[base_b + k];
    prefix_a += (*bundle.fine_)[base_a + k];
  }
  return acc;
}

double iterated_integral(const NoiseBundle& bundle, int j, NoiseId source_a, int l1,
                         NoiseId source_b, int l) {
  check_integral_args(bundle, j, source_a, l1, source_b, l, bundle.grid_.num_steps());
  const int ca = bundle.channel(source_a, l1);
  const int cb = bundle.channel(source_b, l);
  if (ca == cb) return diagonal_iterated_integral(bundle.coarse_(j, cb), bundle.grid_.step(j));
  return iterated_integral_subsampled(bundle, j, source_a, l1, source_b, l);
}

Eigen::MatrixXd gaussian_initial_ensemble(int N, int d, double mean, double std_dev,
                                          std::uint64_t seed, std::uint64_t replicate,
                                          std::uint32_t stream) {
  Eigen::MatrixXd x(N, d);
  for (int i = 0; i < N; ++i) {
    const std::uint64_t src = (static_cast<std::uint64_t>(stream) << 32) | static_cast<std::uint64_t>(i + 1);
    for (int c = 0; c < d; ++c) {
      x(i, c) = mean + std_dev * normal(seed, replicate,
                                        {StreamKind::init, src, 0, 0, static_cast<std::uint32_t>(c), 0});
    }
  }
  return x;
}

}  // namespace rmil
