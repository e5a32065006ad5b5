#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rmil/philox.hpp"

using namespace rmil;

TEST_CASE("philox4x64-10 known-answer vectors") {
  using C = Philox4x64::ctr_t;
  using K = Philox4x64::key_t;
  const std::uint64_t f = ~0ull;

  CHECK(Philox4x64::block(C{0, 0, 0, 0}, K{0, 0}) ==
        C{0x16554d9eca36314cull, 0xdb20fe9d672d0fdcull, 0xd7e772cee186176bull, 0x7e68b68aec7ba23bull});
  CHECK(Philox4x64::block(C{f, f, f, f}, K{f, f}) ==
        C{0x87b092c3013fe90bull, 0x438c3c67be8d0224ull, 0x9cc7d7c69cd777b6ull, 0xa09caebf594f0ba0ull});
  CHECK(Philox4x64::block(C{0x243f6a8885a308d3ull, 0x13198a2e03707344ull, 0xa4093822299f31d0ull,
                            0x082efa98ec4e6c89ull},
                          K{0x452821e638d01377ull, 0xbe5466cf34e90c6cull}) ==
        C{0xa528f45403e61d95ull, 0x38c72dbd566e9788ull, 0xa5a1610e72fd18b5ull, 0x57bd43b5e52b7fe6ull});
  CHECK(Philox4x64::block(C{7, 8, 9, 10}, K{123, 456}) ==
        C{0xfe25821868b686d0ull, 0x7f8ac56d97f90cf7ull, 0x9a7394eac62b9a6dull, 0x044573b10f98bdf3ull});
}

TEST_CASE("draws are pure functions of the key") {
  const DrawKey k{StreamKind::gaussian, 42, 7, 3, 1, 0};
  CHECK(normal(1, 2, k) == normal(1, 2, k));
  CHECK(uniform_open(1, 2, k) == uniform_open(1, 2, k));
  CHECK(normal(1, 2, k) != normal(1, 3, k));
  CHECK(normal(1, 2, k) != normal(2, 2, k));

  DrawKey other = k;
  other.kind = StreamKind::eta;
  CHECK(normal(1, 2, k) != normal(1, 2, other));
}

TEST_CASE("uniforms live strictly inside (0,1)") {
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform_open(3, 4, {StreamKind::eta, 0, static_cast<std::uint64_t>(i), 0, 0, 0});
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("standardized draws pass the mean/variance sanity check") {
  const int m = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < m; ++i) {
    const double z = normal(11, 0, {StreamKind::gaussian, 1, static_cast<std::uint64_t>(i), 0, 0, 0});
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / m;
  const double var = sumsq / m - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(m)));
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("replicates give independent streams") {
  const int m = 100000;
  double sxy = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < m; ++i) {
    const DrawKey k{StreamKind::gaussian, 1, static_cast<std::uint64_t>(i), 0, 0, 0};
    const double x = normal(5, 1, k);
    const double y = normal(5, 2, k);
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double corr = (sxy / m - sx / m * sy / m) /
                      std::sqrt((sxx / m - sx / m * sx / m) * (syy / m - sy / m * sy / m));
  CHECK(std::abs(corr) < 0.02);
}
