// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snspd/analysis.hpp"
#include "snspd/model.hpp"
#include "snspd/source.hpp"

namespace snspd {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a command needs, parsed from a flat dotted-key config file.
// Field-by-field key names and defaults are documented in the README; any
// unknown key is an error.
struct ExperimentConfig {
  std::array<ElementModel, n_elements> elements{};
  Matrix16 xtalk_high{};     // crosstalk.high.*
  Matrix16 xtalk_low{};      // crosstalk.low.*
  Matrix16 xtalk_delay{};    // crosstalk.delay_ns.*

  double dark_target_hz = 5000.0;              // bias.dark_target_hz
  std::optional<double> net_dark_target_hz;    // bias.net_dark_target_hz (exclusive)
  std::array<std::optional<double>, n_elements> bias_override{};  // bias.<i>.current_ua

  SourceModel source;

  std::int64_t duration_ps = 10'000'000'000;  // sim.duration_ps
  std::uint64_t seed = 1;                     // sim.seed
  double instrument_jitter_fwhm_ps = 22.0;    // sim.instrument_jitter_fwhm_ps
  CrosstalkRegime sim_regime = CrosstalkRegime::low_bias;  // sim.xtalk_regime

  std::vector<double> sweep_db = {0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  double sweep_base_rate_hz = 1.6e9;
  double sweep_target_counts = 40000.0;
  std::int64_t sweep_max_point_duration_ps = 2'000'000'000'000;

  double jitter_rep_rate_hz = 5e7;
  double jitter_mu = 0.08;
  double jitter_pulse_fwhm_ps = 8.0;
  std::int64_t jitter_duration_ps = 5'000'000'000'000;
  double jitter_bin_ps = 2.0;

  double xt_high_base_hz = 5000.0;
  double xt_high_aggressor_hz = 1e6;
  std::int64_t xt_high_duration_ps = 100'000'000'000;
  double xt_low_base_hz = 500.0;
  double xt_low_aggressor_hz = 1e6;
  std::int64_t xt_low_duration_ps = 500'000'000'000;
  std::array<int, 2> xt_delay_pair = {0, 1};
  std::int64_t xt_delay_bin_ps = 100;

  std::vector<double> sde_flux_hz = {1e6, 3e6, 1e7, 1e8, 3e8, 1e9};
  double sde_target_photons = 1e6;
  std::int64_t sde_max_duration_ps = 1'000'000'000'000;

  double report_reference_flux_hz = 3e6;

  std::string output_dir = "out";
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Canonical echo of every effective value except output.dir, so output
// trees from different directories stay byte-comparable. Parsing the echo
// reproduces the config exactly.
std::string render_config(const ExperimentConfig& cfg);

// Assemble the simulation inputs. The array carries the crosstalk matrix of
// the requested regime; the operating point applies the dark-rate anchor
// (net target divided evenly when given) and per-element overrides, then
// validates against the array.
ArrayModel array_for(const ExperimentConfig& cfg, CrosstalkRegime regime);
OperatingPoint operating_point_for(const ExperimentConfig& cfg, const ArrayModel& array);

}  // namespace snspd
