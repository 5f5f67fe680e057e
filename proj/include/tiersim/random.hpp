#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tiersim {

// Portable draws on top of mt19937_64 (the std distributions are
// implementation-defined, which would break cross-platform trace identity).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }
  bool chance(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// Zipf(s) over ranks 1..n by rejection-inversion (Hormann & Derflinger).
// O(1) setup, so a fresh sampler per draw is fine for growing populations.
class ZipfSampler {
 public:
  ZipfSampler(std::uint64_t n, double exponent);

  // Rank in [1, n]; rank 1 is the most popular.
  std::uint64_t sample(Rng& rng) const;

  std::uint64_t size() const { return n_; }

 private:
  double h(double x) const { return std::exp(-s_ * std::log(x)); }
  double h_integral(double x) const;
  double h_integral_inverse(double x) const;

  std::uint64_t n_;
  double s_;
  double h_integral_x1_;
  double h_integral_n_;
  double threshold_;
};

}  // namespace tiersim
