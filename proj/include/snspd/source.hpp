// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "snspd/model.hpp"

namespace snspd {

struct CwSource {
  double rate_hz = 0.0;  // mean photon rate before attenuation
};

struct PulsedSource {
  double rep_rate_hz = 5e7;             // pulse repetition rate
  double pulse_fwhm_ps = 8.0;           // optical pulse width, FWHM
  double mean_photons_per_pulse = 0.1;  // Poisson mean per pulse
};

struct SourceModel {
  std::variant<CwSource, PulsedSource> kind = CwSource{};
  double attenuation_db = 0.0;
};

// Time-ordered photon arrivals in integer picoseconds, all within
// [0, duration_ps). Integer timestamps avoid float drift in long streams.
struct PhotonStream {
  std::vector<std::int64_t> arrivals_ps;
  std::int64_t duration_ps = 0;
};

void validate(const SourceModel& s);

// Mean photon rate after attenuation, photons/s.
double source_mean_rate(const SourceModel& s);

// Homogeneous Poisson process: exponential inter-arrival gaps, mean 1/rate.
PhotonStream gen_cw(double rate_hz, std::int64_t duration_ps, std::uint64_t seed);

// Pulse train at k/rep_rate with Poisson(mu) photons per pulse, each spread
// by a zero-mean Gaussian of the given FWHM. Photons pushed outside
// [0, duration) by the spread are dropped.
PhotonStream gen_pulsed(double rep_rate_hz, double mu, double pulse_fwhm_ps,
                        std::int64_t duration_ps, std::uint64_t seed);

// Independent Bernoulli thinning with survival probability 10^(-db/10).
PhotonStream apply_attenuation(PhotonStream stream, double db, std::uint64_t seed);

// Route each photon to element i with probability weights[i], drop it with
// probability 1 - sum(weights). Throws "weights exceed unity" when the
// weights sum above 1.
std::array<PhotonStream, n_elements> split_to_elements(const PhotonStream& stream,
                                                       const std::array<double, n_elements>& weights,
                                                       std::uint64_t seed);

// Generate + attenuate according to the source description.
PhotonStream generate(const SourceModel& s, std::int64_t duration_ps, std::uint64_t seed);

// Line format: "# photon_stream v1 duration_ps=<N>" then one timestamp per line.
std::string serialize(const PhotonStream& stream);
PhotonStream parse_photon_stream(const std::string& text);

}  // namespace snspd
