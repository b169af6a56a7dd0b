// SPDX-License-Identifier: Apache-2.0
#include "snspd/rng.hpp"

#include <cmath>

namespace snspd {

namespace {

// splitmix64 finalizer; full avalanche, so adjacent (purpose, index)
// pairs land on statistically unrelated seeds.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t index) {
  return mix64(mix64(master ^ mix64(purpose)) ^ mix64(index));
}

double Rng::gaussian(double sigma) {
  if (has_spare_) {
    has_spare_ = false;
    return spare_ * sigma;
  }
  // Box-Muller; the spare is cached unscaled so interleaved sigmas work.
  double u = uniform_pos();
  double v = uniform01();
  double r = std::sqrt(-2.0 * std::log(u));
  double theta = 6.283185307179586476925286766559 * v;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta) * sigma;
}

std::uint64_t Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  if (mean < 30.0) {
    // Knuth: multiply uniforms until the product drops below exp(-mean).
    double limit = std::exp(-mean);
    double prod = uniform_pos();
    std::uint64_t n = 0;
    while (prod > limit) {
      prod *= uniform_pos();
      ++n;
    }
    return n;
  }
  // Large means: sum of two halves keeps Knuth's loop short without
  // changing the distribution. Sequenced explicitly; the draws share state.
  double half = mean * 0.5;
  std::uint64_t a = poisson(half);
  std::uint64_t b = poisson(mean - half);
  return a + b;
}

}  // namespace snspd
