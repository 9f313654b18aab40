#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace mtnetopt {

/// Deterministic random stream. Gaussian draws use an explicit Box-Muller
/// transform on top of mt19937_64 so the sequence does not depend on the
/// standard library's distribution internals.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() {
    // 53 random bits -> double in [0,1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (lo, hi].
  double uniform_open_closed(double lo, double hi) {
    return hi - (hi - lo) * uniform();
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // avoid log(0)
    while (u1 <= 0.0) u1 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * M_PI * u2;
    spare_ = mag * std::sin(ang);
    have_spare_ = true;
    return mag * std::cos(ang);
  }

  /// Standard complex Gaussian: E|z|^2 = 1 (re, im ~ N(0, 1/2) independent).
  std::complex<double> complex_gaussian() {
    const double s = std::sqrt(0.5);
    const double re = s * gaussian();
    const double im = s * gaussian();
    return {re, im};
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent child seed from a base seed and stream id
/// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace mtnetopt
