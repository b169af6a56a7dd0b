// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "snspd/engine.hpp"
#include "snspd/model.hpp"

namespace snspd {

struct SweepPoint {
  double attenuation_db = 0.0;
  double incident_rate_hz = 0.0;  // array-level rate after attenuation
  std::array<double, n_elements> counted_rate_hz{};
  std::int64_t duration_ps = 0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
};

struct ResetFit {
  double tau_ns = 0.0;
  double eps = 0.0;
  double dark_hz = 0.0;
  double residual_norm = 0.0;      // RMS relative residual
  bool tau_unconstrained = false;  // no saturation signal in the flux range
};

// Thrown when the reset-time fit exhausts its iteration budget; carries the
// best parameters reached.
class ResetFitError : public std::runtime_error {
 public:
  ResetFitError(const std::string& what, ResetFit best_fit)
      : std::runtime_error(what), best(best_fit) {}
  ResetFit best;
};

struct JitterBudget {
  double j_meas_ps = 0.0;
  double j_tt_ps = 0.0;
  double j_pulse_ps = 0.0;
  double j_snspd_ps = 0.0;
};

// Per-channel outcome; error holds a diagnostic when the channel's
// histogram or deconvolution failed, and is empty on success.
struct ChannelJitter {
  JitterBudget budget;
  std::size_t n_samples = 0;
  std::string error;
};

struct JitterExperimentResult {
  std::array<ChannelJitter, n_elements> channels{};
};

enum class CrosstalkRegime { high_bias, low_bias };

const char* regime_name(CrosstalkRegime regime);

struct DelayHistogram {
  int start_channel = 0;
  int stop_channel = 0;
  std::int64_t bin_width_ps = 100;
  std::vector<std::uint64_t> counts;  // bin b covers [b*bin, (b+1)*bin)
  std::int64_t peak_center_ps() const;
};

struct CrosstalkEstimate {
  Matrix16 percent{};  // increase on j as percent of counts on i
  CrosstalkRegime regime = CrosstalkRegime::high_bias;
  std::array<std::array<bool, n_elements>, n_elements> clamped{};  // negative noise zeroed
  std::optional<DelayHistogram> delay_hist;
};

struct CrosstalkOptions {
  std::optional<std::pair<int, int>> delay_pair;  // start-stop channels
  std::int64_t delay_bin_ps = 100;
  std::int64_t delay_window_ps = 5000;
};

// One simulate() per attenuation step; the recorded incident rate is the
// set (expected) post-attenuation rate, as an experimenter would log it.
// durations_ps holds one entry per step, or a single entry used for all.
SweepResult run_sweep(const SimConfig& base, const std::vector<double>& db_list,
                      const std::vector<std::int64_t>& durations_ps);

// Least-squares fit of R(phi) = eps*phi_e/(1 + eps*phi_e*tau) + D over
// (eps, tau, D) with squared relative residuals, phi_e = incident rate *
// coupling_weight. Needs >= 6 points spanning >= 3 decades.
ResetFit fit_reset_time(const SweepResult& sweep, int channel, double coupling_weight = 1.0);

// 1/tau as a rate; throws "unbounded" for tau = 0.
double max_full_rate_hz(const ResetFit& fit);

// Quadrature budget: sqrt(j_meas^2 - j_tt^2 - j_pulse^2); throws
// "unphysical budget" when the subtraction goes negative.
double deconvolve_jitter(double j_meas, double j_tt, double j_pulse);

// FWHM by linear interpolation between the outermost half-maximum
// crossings of the histogram (empty space beyond the data counts as zero).
// Needs >= 1000 samples.
double fwhm_of_histogram(const std::vector<double>& samples, double bin_width);

// Pulsed-source closed loop: simulate, fold observed times onto the pulse
// period, histogram, deconvolve. Per-channel failures are recorded in the
// result instead of aborting the other channels.
JitterExperimentResult jitter_experiment(const ArrayModel& array, const OperatingPoint& op,
                                         double rep_rate_hz, double mu, double j_pulse_fwhm_ps,
                                         double j_tt_fwhm_ps, std::int64_t duration_ps,
                                         std::uint64_t seed, double bin_ps = 2.0);

// Population outliers among the recovered j_snspd values (median/MAD rule).
std::array<bool, n_elements> flag_jitter_outliers(const JitterExperimentResult& result);

// Pairwise dark-count protocol: bias everything for base_dark_hz, raise one
// aggressor to aggressor_dark_hz with no light, and take the victim's count
// increase over an identically seeded baseline run as a percent of the
// aggressor's counts. One run per aggressor covers all 15 victims at once.
CrosstalkEstimate estimate_crosstalk(const ArrayModel& array, double base_dark_hz,
                                     double aggressor_dark_hz, std::int64_t duration_ps,
                                     std::uint64_t seed, CrosstalkRegime regime,
                                     const CrosstalkOptions& options = {});

// Monte Carlo SDE: photon-origin registrations / incident photons, one CW
// run per flux. durations_ps: one entry per flux, or a single shared entry.
std::vector<std::pair<double, double>> sde_vs_flux_mc(const ArrayModel& array,
                                                      const OperatingPoint& op,
                                                      const std::vector<double>& flux_list_hz,
                                                      const std::vector<std::int64_t>& durations_ps,
                                                      std::uint64_t seed);

}  // namespace snspd
