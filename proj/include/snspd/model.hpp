// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>

namespace snspd {

inline constexpr std::size_t n_elements = 16;

using Matrix16 = std::array<std::array<double, n_elements>, n_elements>;

// Parametric bias response of one element: logistic efficiency curve with a
// saturation plateau, and a log-linear dark-count curve anchored at the
// switching current. Currents are in arbitrary microamp units; only ratios
// enter the model.
struct BiasResponse {
  double i_switch = 20.0;  // switching current, uA; biasing above it latches
  double eps_max = 0.834;  // plateau detection efficiency, (0, 1]
  double i_mid = 10.0;     // bias at eps_max/2, uA
  double i_width = 0.5;    // sigmoid scale, uA
  double d_switch = 1e6;   // dark rate at i_switch, counts/s
  double d_decade = 1.0;   // bias change per factor-10 of dark rate, uA
};

struct ElementModel {
  int index = 0;
  BiasResponse response;
  double dead_time = 9.6;     // non-paralyzable reset time, ns; 0 = ideal
  double jitter_fwhm = 86.1;  // device timing jitter, ps FWHM; 0 = ideal
  double coupling = 0.0625;   // optical coupling weight, [0, 1]
};

struct ArrayModel {
  std::array<ElementModel, n_elements> elements{};
  Matrix16 crosstalk_prob{};   // c[i][j]: P(registration on i induces a count on j)
  Matrix16 crosstalk_delay{};  // d[i][j]: delay of the induced count, ns
};

// Per-element bias currents. Valid when 0 <= bias_i <= i_switch_i.
struct OperatingPoint {
  std::array<double, n_elements> bias{};
};

// Validation throws std::invalid_argument naming the offending field.
// Zero dead time and zero jitter are accepted (idealized detectors used in
// closed-loop checks); crosstalk delays must be positive wherever the
// corresponding probability is nonzero.
void validate(const BiasResponse& r, const std::string& context);
void validate(const ElementModel& e);
void validate(const ArrayModel& a);
void validate(const ArrayModel& a, const OperatingPoint& op);

// eps_max / (1 + exp(-(bias - i_mid)/i_width)); monotone nondecreasing.
double efficiency_at(const BiasResponse& r, double bias);

// d_switch * 10^((bias - i_switch)/d_decade); strictly increasing.
double dark_rate_at(const BiasResponse& r, double bias);

// Closed-form inverse of dark_rate_at. Throws for target <= 0 and reports
// "bias underflow" when the target would need a negative bias.
double bias_for_dark_rate(const BiasResponse& r, double target_hz);

// Bias every element for the same per-element dark rate.
OperatingPoint operating_point_for_dark_rate(const ArrayModel& a, double target_hz);

// Closed-form system detection efficiency under uniform CW flux (photons/s):
//   SDE(phi) = (1/phi) * sum_i eps_i w_i phi / (1 + eps_i w_i phi tau_i)
// with tau_i in seconds. At phi = 0 returns the zero-flux limit sum eps_i w_i.
double sde_vs_flux(const ArrayModel& a, const OperatingPoint& op, double flux_hz);

}  // namespace snspd
