// Counter-based random number generation (Philox4x64-10).
//
// Every draw in the library is a pure function of (seed, replicate, draw key),
// so results are independent of evaluation order, thread count and platform.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rmil {

/// Philox 4x64 block cipher with 10 rounds, as introduced by Salmon et al.
/// (the "Random123" generator family). Maps a 256-bit counter and a 128-bit
/// key to 256 bits of output; distinct counters give independent streams.
struct Philox4x64 {
  using ctr_t = std::array<std::uint64_t, 4>;
  using key_t = std::array<std::uint64_t, 2>;

  static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ull;
  static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ull;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

  static ctr_t block(ctr_t ctr, key_t key) noexcept {
    for (int round = 0; round < 10; ++round) {
      const unsigned __int128 p0 = static_cast<unsigned __int128>(kMul0) * ctr[0];
      const unsigned __int128 p1 = static_cast<unsigned __int128>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint64_t>(p1 >> 64) ^ ctr[1] ^ key[0],
             static_cast<std::uint64_t>(p1),
             static_cast<std::uint64_t>(p0 >> 64) ^ ctr[3] ^ key[1],
             static_cast<std::uint64_t>(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

/// Purpose of a draw. Distinct kinds never collide even for equal indices.
enum class StreamKind : std::uint64_t {
  gaussian = 0,   // Brownian sub-increments (path data, no grid tag)
  eta = 1,        // per-step randomisation uniforms (grid-tagged)
  bridge = 2,     // Brownian-bridge conditioning draws (grid-tagged)
  init = 3,       // initial ensemble draws
  probe = 4,      // Lipschitz probe sampling
  bootstrap = 5,  // replicate resampling in studies
  quad = 6,       // quadrature-study path construction
};

/// Identifies one scalar draw within a (seed, replicate) pair.
///
/// `source` is 0 for the common noise and i+1 for particle i; study-level
/// streams fold a population id into the high bits (see noise.hpp).
/// `tag` distinguishes per-bundle randomisation (eta/bridge draws carry the
/// bundle's step count so coarsened bundles get fresh draws).
struct DrawKey {
  StreamKind kind = StreamKind::gaussian;
  std::uint64_t source = 0;
  std::uint64_t step = 0;
  std::uint64_t substep = 0;
  std::uint32_t component = 0;
  std::uint32_t tag = 0;
};

inline Philox4x64::ctr_t to_counter(const DrawKey& k) noexcept {
  return {(static_cast<std::uint64_t>(k.kind) << 56) | k.source, k.step, k.substep,
          (static_cast<std::uint64_t>(k.tag) << 32) | k.component};
}

/// Uniform draw in the open interval (0,1); never returns 0 or 1.
inline double uniform_open(std::uint64_t seed, std::uint64_t replicate, const DrawKey& k) noexcept {
  const auto out = Philox4x64::block(to_counter(k), {seed, replicate});
  return (static_cast<double>(out[0] >> 12) + 0.5) * 0x1.0p-52;
}

/// Standard normal draw (Box-Muller on the first two output words).
inline double normal(std::uint64_t seed, std::uint64_t replicate, const DrawKey& k) noexcept {
  const auto out = Philox4x64::block(to_counter(k), {seed, replicate});
  const double u1 = (static_cast<double>(out[0] >> 12) + 0.5) * 0x1.0p-52;
  const double u2 = (static_cast<double>(out[1] >> 12) + 0.5) * 0x1.0p-52;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rmil
