// SPDX-License-Identifier: Apache-2.0
#include "snspd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <queue>
#include <stdexcept>

#include "snspd/rng.hpp"

namespace snspd {

namespace {

// Base candidate (photon or dark). Crosstalk candidates live on the heap.
struct Candidate {
  std::int64_t time_ps;
  std::int16_t channel;
  TagOrigin origin;
};

// Photons sort before darks at equal times, both before crosstalk; the final
// sequence tiebreak on heap entries keeps the event order total.
bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.time_ps != b.time_ps) return a.time_ps < b.time_ps;
  if (a.origin != b.origin) return a.origin < b.origin;
  return a.channel < b.channel;
}

struct XtalkCandidate {
  std::int64_t time_ps;
  std::int16_t channel;
  std::uint64_t seq;
};

struct XtalkAfter {
  bool operator()(const XtalkCandidate& a, const XtalkCandidate& b) const {
    if (a.time_ps != b.time_ps) return a.time_ps > b.time_ps;
    if (a.channel != b.channel) return a.channel > b.channel;
    return a.seq > b.seq;
  }
};

}  // namespace

const char* origin_name(TagOrigin origin) {
  switch (origin) {
    case TagOrigin::photon: return "photon";
    case TagOrigin::dark: return "dark";
    case TagOrigin::crosstalk: return "crosstalk";
  }
  return "unknown";
}

SimResult simulate_on_streams(const SimConfig& cfg, std::array<PhotonStream, n_elements> streams) {
  validate(cfg.array, cfg.op);
  if (cfg.duration_ps <= 0) throw std::invalid_argument("simulate: duration must be positive");
  if (!(cfg.instrument_jitter_fwhm_ps >= 0.0))
    throw std::invalid_argument("simulate: instrument jitter must be nonnegative");

  SimResult result;
  std::vector<Candidate> candidates;
  std::size_t reserve = 0;
  for (const PhotonStream& s : streams) reserve += s.arrivals_ps.size();
  candidates.reserve(reserve / 2 + 1024);

  // Efficiency thinning commutes with the event loop because the bias is
  // static: each photon candidate is an independent Bernoulli(eps) trial.
  for (std::size_t ch = 0; ch < n_elements; ++ch) {
    const ElementModel& elem = cfg.array.elements[ch];
    result.incident_photons += streams[ch].arrivals_ps.size();
    double eps = efficiency_at(elem.response, cfg.op.bias[ch]);
    Rng accept(derive_seed(cfg.seed, purpose::accept, ch));
    for (std::int64_t t : streams[ch].arrivals_ps)
      if (accept.bernoulli(eps))
        candidates.push_back({t, std::int16_t(ch), TagOrigin::photon});
    streams[ch].arrivals_ps = {};

    double dark_hz = dark_rate_at(elem.response, cfg.op.bias[ch]);
    if (dark_hz > 0.0) {
      Rng dark(derive_seed(cfg.seed, purpose::dark, ch));
      double rate_per_ps = dark_hz * 1e-12;
      // Gap shorter than ~3e7 ps at any realistic rate, so skip the stream
      // entirely when even one expected event is absurdly unlikely.
      if (rate_per_ps * double(cfg.duration_ps) > 1e-9) {
        double t = 0.0;
        for (;;) {
          t += dark.exponential(rate_per_ps);
          if (!(t < double(cfg.duration_ps))) break;
          candidates.push_back(
              {static_cast<std::int64_t>(t), std::int16_t(ch), TagOrigin::dark});
        }
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), candidate_less);

  std::array<std::int64_t, n_elements> dead_ps;
  std::array<double, n_elements> device_fwhm;
  std::array<std::vector<std::pair<std::int16_t, double>>, n_elements> xtalk_targets;
  std::array<std::vector<std::int64_t>, n_elements> xtalk_delay_ps;
  for (std::size_t i = 0; i < n_elements; ++i) {
    dead_ps[i] = std::llround(cfg.array.elements[i].dead_time * 1000.0);
    device_fwhm[i] = cfg.array.elements[i].jitter_fwhm;
    for (std::size_t j = 0; j < n_elements; ++j) {
      double c = cfg.array.crosstalk_prob[i][j];
      if (c > 0.0) {
        xtalk_targets[i].push_back({std::int16_t(j), c});
        xtalk_delay_ps[i].push_back(std::llround(cfg.array.crosstalk_delay[i][j] * 1000.0));
      }
    }
  }

  std::vector<Rng> device_rng, instr_rng, xtalk_rng;
  device_rng.reserve(n_elements);
  instr_rng.reserve(n_elements);
  xtalk_rng.reserve(n_elements);
  for (std::size_t ch = 0; ch < n_elements; ++ch) {
    device_rng.emplace_back(derive_seed(cfg.seed, purpose::device_jitter, ch));
    instr_rng.emplace_back(derive_seed(cfg.seed, purpose::instrument_jitter, ch));
    xtalk_rng.emplace_back(derive_seed(cfg.seed, purpose::crosstalk, ch));
  }

  std::array<std::int64_t, n_elements> last_reg;
  last_reg.fill(std::numeric_limits<std::int64_t>::min() / 4);

  std::priority_queue<XtalkCandidate, std::vector<XtalkCandidate>, XtalkAfter> pending;
  std::uint64_t seq = 0;
  result.tags.reserve(candidates.size());

  std::size_t idx = 0;
  while (idx < candidates.size() || !pending.empty()) {
    Candidate ev;
    // Base candidates win ties: at equal times photon/dark rank below
    // crosstalk in the total event order.
    if (!pending.empty() &&
        (idx == candidates.size() || pending.top().time_ps < candidates[idx].time_ps)) {
      const XtalkCandidate& x = pending.top();
      ev = {x.time_ps, x.channel, TagOrigin::crosstalk};
      pending.pop();
    } else {
      ev = candidates[idx++];
    }

    std::size_t ch = std::size_t(ev.channel);
    if (ev.time_ps - last_reg[ch] < dead_ps[ch]) continue;
    last_reg[ch] = ev.time_ps;

    double observed = double(ev.time_ps);
    if (device_fwhm[ch] > 0.0) observed += device_rng[ch].gaussian_fwhm(device_fwhm[ch]);
    if (cfg.instrument_jitter_fwhm_ps > 0.0)
      observed += instr_rng[ch].gaussian_fwhm(cfg.instrument_jitter_fwhm_ps);
    result.tags.push_back({std::llround(observed), ev.time_ps, ev.channel, ev.origin});

    // Single hop: induced candidates never induce further crosstalk.
    if (ev.origin != TagOrigin::crosstalk) {
      for (std::size_t k = 0; k < xtalk_targets[ch].size(); ++k) {
        if (xtalk_rng[ch].bernoulli(xtalk_targets[ch][k].second)) {
          std::int64_t tx = ev.time_ps + xtalk_delay_ps[ch][k];
          if (tx < cfg.duration_ps)
            pending.push({tx, xtalk_targets[ch][k].first, seq++});
        }
      }
    }
  }

  std::stable_sort(result.tags.begin(), result.tags.end(),
                   [](const TimeTag& a, const TimeTag& b) { return a.time_ps < b.time_ps; });
  return result;
}

SimResult simulate_full(const SimConfig& cfg) {
  validate(cfg.array, cfg.op);
  if (cfg.duration_ps <= 0) throw std::invalid_argument("simulate: duration must be positive");
  PhotonStream stream = generate(cfg.source, cfg.duration_ps, cfg.seed);
  std::array<double, n_elements> weights;
  for (std::size_t i = 0; i < n_elements; ++i) weights[i] = cfg.array.elements[i].coupling;
  std::array<PhotonStream, n_elements> streams =
      split_to_elements(stream, weights, derive_seed(cfg.seed, purpose::split, 0));
  std::uint64_t offered = stream.arrivals_ps.size();
  stream.arrivals_ps = {};
  SimResult result = simulate_on_streams(cfg, std::move(streams));
  // Incident photons include the uncoupled-loss share.
  result.incident_photons = offered;
  return result;
}

std::vector<TimeTag> simulate(const SimConfig& cfg) { return simulate_full(cfg).tags; }

std::vector<MeasuredTag> measured_view(const std::vector<TimeTag>& tags) {
  std::vector<MeasuredTag> out;
  out.reserve(tags.size());
  for (const TimeTag& t : tags) out.push_back({t.time_ps, t.channel});
  return out;
}

std::array<double, n_elements> count_rates(const std::vector<TimeTag>& tags,
                                           std::int64_t duration_ps) {
  if (duration_ps <= 0) throw std::invalid_argument("count_rates: duration must be positive");
  std::array<double, n_elements> rates{};
  for (const TimeTag& t : tags) rates[std::size_t(t.channel)] += 1.0;
  double seconds = double(duration_ps) * 1e-12;
  for (double& r : rates) r /= seconds;
  return rates;
}

namespace {

std::string timetag_header(std::int64_t duration_ps, std::uint64_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "# timetags v1 duration_ps=%lld seed=%llu\n",
                static_cast<long long>(duration_ps), static_cast<unsigned long long>(seed));
  return buf;
}

}  // namespace

std::string serialize_timetags(const std::vector<TimeTag>& tags, std::int64_t duration_ps,
                               std::uint64_t seed) {
  std::string out = timetag_header(duration_ps, seed);
  out.reserve(out.size() + tags.size() * 24);
  char buf[64];
  for (const TimeTag& t : tags) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%s\n", int(t.channel),
                  static_cast<long long>(t.time_ps), origin_name(t.origin));
    out += buf;
  }
  return out;
}

std::string serialize_timetags_measured(const std::vector<TimeTag>& tags, std::int64_t duration_ps,
                                        std::uint64_t seed) {
  std::string out = timetag_header(duration_ps, seed);
  out.reserve(out.size() + tags.size() * 16);
  char buf[48];
  for (const TimeTag& t : tags) {
    std::snprintf(buf, sizeof buf, "%d,%lld\n", int(t.channel),
                  static_cast<long long>(t.time_ps));
    out += buf;
  }
  return out;
}

std::vector<TimeTag> parse_timetags(const std::string& text, std::int64_t* duration_ps,
                                    std::uint64_t* seed) {
  const std::string header = "# timetags v1 duration_ps=";
  if (text.compare(0, header.size(), header) != 0)
    throw std::runtime_error("timetags: missing v1 header");
  const char* p = text.c_str() + header.size();
  char* end = nullptr;
  std::int64_t dur = std::strtoll(p, &end, 10);
  if (duration_ps) *duration_ps = dur;
  const char* seed_key = std::strstr(end, "seed=");
  if (!seed_key) throw std::runtime_error("timetags: header missing seed");
  std::uint64_t s = std::strtoull(seed_key + 5, nullptr, 10);
  if (seed) *seed = s;

  std::vector<TimeTag> tags;
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos) return tags;
  ++pos;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    if (eol > pos) {
      const char* line = text.c_str() + pos;
      char* cursor = nullptr;
      long ch = std::strtol(line, &cursor, 10);
      if (!cursor || *cursor != ',') throw std::runtime_error("timetags: malformed record");
      long long t = std::strtoll(cursor + 1, &cursor, 10);
      TimeTag tag;
      tag.channel = std::int16_t(ch);
      tag.time_ps = t;
      tag.true_time_ps = t;
      if (cursor && *cursor == ',') {
        const char* name = cursor + 1;
        if (std::strncmp(name, "photon", 6) == 0) tag.origin = TagOrigin::photon;
        else if (std::strncmp(name, "dark", 4) == 0) tag.origin = TagOrigin::dark;
        else if (std::strncmp(name, "crosstalk", 9) == 0) tag.origin = TagOrigin::crosstalk;
        else throw std::runtime_error("timetags: unknown origin label");
      }
      tags.push_back(tag);
    }
    pos = eol + 1;
  }
  return tags;
}

}  // namespace snspd
