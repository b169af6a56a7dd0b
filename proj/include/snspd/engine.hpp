// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snspd/model.hpp"
#include "snspd/source.hpp"

namespace snspd {

enum class TagOrigin : std::uint8_t { photon = 0, dark = 1, crosstalk = 2 };

const char* origin_name(TagOrigin origin);

// One detection record. time_ps is the observed (post-jitter) timestamp;
// true_time_ps and origin are truth metadata, kept for closed-loop checks
// and stripped from measured exports.
struct TimeTag {
  std::int64_t time_ps = 0;
  std::int64_t true_time_ps = 0;
  std::int16_t channel = 0;
  TagOrigin origin = TagOrigin::photon;
};

struct MeasuredTag {
  std::int64_t time_ps = 0;
  std::int16_t channel = 0;
};

struct SimConfig {
  ArrayModel array;
  OperatingPoint op;
  SourceModel source;
  std::int64_t duration_ps = 0;
  std::uint64_t seed = 1;
  double instrument_jitter_fwhm_ps = 0.0;  // shared time-tagger jitter
};

struct SimResult {
  std::vector<TimeTag> tags;          // sorted by observed time
  std::uint64_t incident_photons = 0; // photons offered to the array after attenuation
};

// Discrete-event run: photons are routed and thinned by the per-element
// efficiency at the operating bias, merged with per-element Poisson dark
// streams, and processed in true-time order under non-paralyzable dead
// time. Registrations draw device + instrument jitter and may induce
// single-hop delayed crosstalk candidates on other elements.
SimResult simulate_full(const SimConfig& cfg);
std::vector<TimeTag> simulate(const SimConfig& cfg);

// Same run on pre-routed per-element photon streams (the source description
// in cfg is ignored). Streams are consumed.
SimResult simulate_on_streams(const SimConfig& cfg, std::array<PhotonStream, n_elements> streams);

std::vector<MeasuredTag> measured_view(const std::vector<TimeTag>& tags);

// Per-channel tag count divided by the duration, counts/s.
std::array<double, n_elements> count_rates(const std::vector<TimeTag>& tags,
                                           std::int64_t duration_ps);

// Tag export, one record per line after the header
// "# timetags v1 duration_ps=<N> seed=<S>". Full records are
// "channel,time_ps,origin"; the measured view omits the origin column.
std::string serialize_timetags(const std::vector<TimeTag>& tags, std::int64_t duration_ps,
                               std::uint64_t seed);
std::string serialize_timetags_measured(const std::vector<TimeTag>& tags, std::int64_t duration_ps,
                                        std::uint64_t seed);
std::vector<TimeTag> parse_timetags(const std::string& text, std::int64_t* duration_ps = nullptr,
                                    std::uint64_t* seed = nullptr);

}  // namespace snspd
