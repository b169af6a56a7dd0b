// SPDX-License-Identifier: Apache-2.0
#include "snspd/model.hpp"

#include <cmath>
#include <stdexcept>

namespace snspd {

namespace {

void fail(const std::string& context, const std::string& what) {
  throw std::invalid_argument(context + ": " + what);
}

}  // namespace

void validate(const BiasResponse& r, const std::string& context) {
  if (!(r.eps_max > 0.0) || !(r.eps_max <= 1.0)) fail(context, "eps_max must be in (0, 1]");
  if (!(r.i_width > 0.0)) fail(context, "i_width must be positive");
  if (!(r.i_mid > 0.0)) fail(context, "i_mid must be positive");
  if (!(r.i_mid < r.i_switch)) fail(context, "i_mid must be below i_switch");
  if (!(r.d_switch > 0.0)) fail(context, "d_switch must be positive");
  if (!(r.d_decade > 0.0)) fail(context, "d_decade must be positive");
}

void validate(const ElementModel& e) {
  std::string context = "element " + std::to_string(e.index);
  validate(e.response, context);
  if (!(e.dead_time >= 0.0)) fail(context, "dead_time must be nonnegative");
  if (!(e.jitter_fwhm >= 0.0)) fail(context, "jitter_fwhm must be nonnegative");
  if (!(e.coupling >= 0.0) || !(e.coupling <= 1.0)) fail(context, "coupling must be in [0, 1]");
}

void validate(const ArrayModel& a) {
  double coupling_sum = 0.0;
  for (std::size_t i = 0; i < n_elements; ++i) {
    validate(a.elements[i]);
    coupling_sum += a.elements[i].coupling;
  }
  // Excess over unity cannot be absorbed as loss; slight tolerance for
  // configs written as decimal sixteenths.
  if (coupling_sum > 1.0 + 1e-12) fail("array", "coupling weights exceed unity");
  for (std::size_t i = 0; i < n_elements; ++i) {
    for (std::size_t j = 0; j < n_elements; ++j) {
      std::string context = "crosstalk " + std::to_string(i) + "->" + std::to_string(j);
      double c = a.crosstalk_prob[i][j];
      if (!(c >= 0.0) || !(c <= 1.0)) fail(context, "probability must be in [0, 1]");
      if (i == j && c != 0.0) fail(context, "diagonal probability must be zero");
      if (i != j && c > 0.0 && !(a.crosstalk_delay[i][j] > 0.0))
        fail(context, "delay must be positive");
    }
  }
}

void validate(const ArrayModel& a, const OperatingPoint& op) {
  validate(a);
  for (std::size_t i = 0; i < n_elements; ++i) {
    std::string context = "element " + std::to_string(i);
    if (!(op.bias[i] >= 0.0)) fail(context, "bias must be nonnegative");
    if (op.bias[i] > a.elements[i].response.i_switch)
      fail(context, "bias exceeds i_switch (element would latch)");
  }
}

double efficiency_at(const BiasResponse& r, double bias) {
  return r.eps_max / (1.0 + std::exp(-(bias - r.i_mid) / r.i_width));
}

double dark_rate_at(const BiasResponse& r, double bias) {
  return r.d_switch * std::pow(10.0, (bias - r.i_switch) / r.d_decade);
}

double bias_for_dark_rate(const BiasResponse& r, double target_hz) {
  if (!(target_hz > 0.0)) throw std::invalid_argument("dark-rate target must be positive");
  double bias = r.i_switch + r.d_decade * std::log10(target_hz / r.d_switch);
  if (bias < 0.0)
    throw std::runtime_error("bias underflow: dark-rate target " + std::to_string(target_hz) +
                             "/s needs a negative bias");
  return bias;
}

OperatingPoint operating_point_for_dark_rate(const ArrayModel& a, double target_hz) {
  OperatingPoint op;
  for (std::size_t i = 0; i < n_elements; ++i)
    op.bias[i] = bias_for_dark_rate(a.elements[i].response, target_hz);
  return op;
}

double sde_vs_flux(const ArrayModel& a, const OperatingPoint& op, double flux_hz) {
  if (!(flux_hz >= 0.0)) throw std::invalid_argument("flux must be nonnegative");
  double sde = 0.0;
  for (std::size_t i = 0; i < n_elements; ++i) {
    const ElementModel& e = a.elements[i];
    double eps_w = efficiency_at(e.response, op.bias[i]) * e.coupling;
    double tau_s = e.dead_time * 1e-9;
    // Per-element share of the flux saturates at 1/tau; the flux factors
    // cancel in the ratio, which also covers the zero-flux limit.
    sde += eps_w / (1.0 + eps_w * flux_hz * tau_s);
  }
  return sde;
}

}  // namespace snspd
