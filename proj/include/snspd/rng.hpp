// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace snspd {

// Child-seed derivation. Every stochastic consumer gets its own stream,
// derived from the master seed by a fixed (purpose, index) pair, so a
// change to one element's parameters never perturbs another element's
// draws and the same master seed reproduces a run bit-exactly.
namespace purpose {
inline constexpr std::uint64_t source_gen = 1;
inline constexpr std::uint64_t attenuation = 2;
inline constexpr std::uint64_t split = 3;
inline constexpr std::uint64_t accept = 4;             // index = channel
inline constexpr std::uint64_t dark = 5;               // index = channel
inline constexpr std::uint64_t device_jitter = 6;      // index = channel
inline constexpr std::uint64_t instrument_jitter = 7;  // index = channel
inline constexpr std::uint64_t crosstalk = 8;          // index = channel
inline constexpr std::uint64_t sweep_point = 9;        // index = sweep point
inline constexpr std::uint64_t sde_point = 10;         // index = flux point
}  // namespace purpose

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t index);

// FWHM = 2*sqrt(2*ln 2) * sigma for a Gaussian.
inline constexpr double kFwhmPerSigma = 2.3548200450309493;
inline constexpr double kSigmaPerFwhm = 1.0 / kFwhmPerSigma;

// Samplers on top of std::mt19937_64. The distributions are implemented
// here (inverse-CDF exponential, Box-Muller Gaussian, Knuth Poisson) so a
// given seed yields the same stream on any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1).
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }

  // Exponential inter-arrival gap, mean 1/rate.
  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  double gaussian(double sigma);
  double gaussian_fwhm(double fwhm) { return gaussian(fwhm * kSigmaPerFwhm); }

  std::uint64_t poisson(double mean);

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace snspd
