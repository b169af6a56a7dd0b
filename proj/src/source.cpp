// SPDX-License-Identifier: Apache-2.0
#include "snspd/source.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "snspd/rng.hpp"

namespace snspd {

void validate(const SourceModel& s) {
  if (std::holds_alternative<CwSource>(s.kind)) {
    if (!(std::get<CwSource>(s.kind).rate_hz >= 0.0))
      throw std::invalid_argument("source: rate must be nonnegative");
  } else {
    const PulsedSource& p = std::get<PulsedSource>(s.kind);
    if (!(p.rep_rate_hz > 0.0)) throw std::invalid_argument("source: rep_rate must be positive");
    if (!(p.pulse_fwhm_ps >= 0.0))
      throw std::invalid_argument("source: pulse_fwhm must be nonnegative");
    if (!(p.mean_photons_per_pulse >= 0.0))
      throw std::invalid_argument("source: mean photons per pulse must be nonnegative");
  }
  if (!(s.attenuation_db >= 0.0))
    throw std::invalid_argument("source: attenuation must be nonnegative");
}

double source_mean_rate(const SourceModel& s) {
  double base = std::holds_alternative<CwSource>(s.kind)
                    ? std::get<CwSource>(s.kind).rate_hz
                    : std::get<PulsedSource>(s.kind).rep_rate_hz *
                          std::get<PulsedSource>(s.kind).mean_photons_per_pulse;
  return base * std::pow(10.0, -s.attenuation_db / 10.0);
}

PhotonStream gen_cw(double rate_hz, std::int64_t duration_ps, std::uint64_t seed) {
  if (!(rate_hz >= 0.0)) throw std::invalid_argument("gen_cw: rate must be nonnegative");
  if (duration_ps <= 0) throw std::invalid_argument("gen_cw: duration must be positive");
  PhotonStream stream;
  stream.duration_ps = duration_ps;
  if (rate_hz == 0.0) return stream;
  Rng rng(seed);
  double rate_per_ps = rate_hz * 1e-12;
  stream.arrivals_ps.reserve(static_cast<std::size_t>(rate_per_ps * double(duration_ps) * 1.05) + 16);
  // Accumulate in double picoseconds; sub-ps rounding error stays below one
  // ulp of the final timestamp, and floor quantizes onto the ps grid.
  double t = 0.0;
  for (;;) {
    t += rng.exponential(rate_per_ps);
    if (!(t < double(duration_ps))) break;
    stream.arrivals_ps.push_back(static_cast<std::int64_t>(t));
  }
  return stream;
}

PhotonStream gen_pulsed(double rep_rate_hz, double mu, double pulse_fwhm_ps,
                        std::int64_t duration_ps, std::uint64_t seed) {
  if (!(rep_rate_hz > 0.0)) throw std::invalid_argument("gen_pulsed: rep_rate must be positive");
  if (!(mu >= 0.0)) throw std::invalid_argument("gen_pulsed: mu must be nonnegative");
  if (duration_ps <= 0) throw std::invalid_argument("gen_pulsed: duration must be positive");
  PhotonStream stream;
  stream.duration_ps = duration_ps;
  if (mu == 0.0) return stream;
  Rng rng(seed);
  double period_ps = 1e12 / rep_rate_hz;
  double expected = mu * double(duration_ps) / period_ps;
  stream.arrivals_ps.reserve(static_cast<std::size_t>(expected * 1.05) + 16);
  for (std::uint64_t k = 0;; ++k) {
    double pulse_t = double(k) * period_ps;
    if (!(pulse_t < double(duration_ps))) break;
    std::uint64_t n = rng.poisson(mu);
    for (std::uint64_t m = 0; m < n; ++m) {
      double t = pulse_t;
      if (pulse_fwhm_ps > 0.0) t += rng.gaussian_fwhm(pulse_fwhm_ps);
      if (t >= 0.0 && t < double(duration_ps))
        stream.arrivals_ps.push_back(static_cast<std::int64_t>(t));
    }
  }
  // The Gaussian spread can reorder photons across pulse boundaries.
  std::sort(stream.arrivals_ps.begin(), stream.arrivals_ps.end());
  return stream;
}

PhotonStream apply_attenuation(PhotonStream stream, double db, std::uint64_t seed) {
  if (!(db >= 0.0)) throw std::invalid_argument("apply_attenuation: db must be nonnegative");
  double survival = std::pow(10.0, -db / 10.0);
  Rng rng(seed);
  std::vector<std::int64_t> kept;
  kept.reserve(static_cast<std::size_t>(double(stream.arrivals_ps.size()) * survival * 1.05) + 16);
  for (std::int64_t t : stream.arrivals_ps)
    if (rng.bernoulli(survival)) kept.push_back(t);
  stream.arrivals_ps = std::move(kept);
  return stream;
}

std::array<PhotonStream, n_elements> split_to_elements(const PhotonStream& stream,
                                                       const std::array<double, n_elements>& weights,
                                                       std::uint64_t seed) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("split_to_elements: negative weight");
    total += w;
  }
  if (total > 1.0 + 1e-12) throw std::invalid_argument("split_to_elements: weights exceed unity");
  std::array<double, n_elements> cum{};
  double acc = 0.0;
  for (std::size_t i = 0; i < n_elements; ++i) {
    acc += weights[i];
    cum[i] = acc;
  }
  std::array<PhotonStream, n_elements> out;
  for (std::size_t i = 0; i < n_elements; ++i) {
    out[i].duration_ps = stream.duration_ps;
    out[i].arrivals_ps.reserve(
        static_cast<std::size_t>(double(stream.arrivals_ps.size()) * weights[i] * 1.05) + 16);
  }
  Rng rng(seed);
  for (std::int64_t t : stream.arrivals_ps) {
    double u = rng.uniform01();
    if (u >= total) continue;  // uncoupled loss
    std::size_t idx = std::size_t(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    out[idx].arrivals_ps.push_back(t);
  }
  return out;
}

PhotonStream generate(const SourceModel& s, std::int64_t duration_ps, std::uint64_t seed) {
  validate(s);
  // Bernoulli-thinned Poisson is Poisson at the net rate (per pulse too),
  // so attenuation folds into generation; this keeps the photon count
  // bounded by what survives the attenuator instead of the raw source.
  double survival = std::pow(10.0, -s.attenuation_db / 10.0);
  std::uint64_t gen_seed = derive_seed(seed, purpose::source_gen, 0);
  if (std::holds_alternative<CwSource>(s.kind))
    return gen_cw(std::get<CwSource>(s.kind).rate_hz * survival, duration_ps, gen_seed);
  const PulsedSource& p = std::get<PulsedSource>(s.kind);
  return gen_pulsed(p.rep_rate_hz, p.mean_photons_per_pulse * survival, p.pulse_fwhm_ps,
                    duration_ps, gen_seed);
}

std::string serialize(const PhotonStream& stream) {
  std::string out = "# photon_stream v1 duration_ps=" + std::to_string(stream.duration_ps) + "\n";
  char buf[32];
  for (std::int64_t t : stream.arrivals_ps) {
    std::snprintf(buf, sizeof buf, "%lld\n", static_cast<long long>(t));
    out += buf;
  }
  return out;
}

PhotonStream parse_photon_stream(const std::string& text) {
  PhotonStream stream;
  const std::string header = "# photon_stream v1 duration_ps=";
  if (text.compare(0, header.size(), header) != 0)
    throw std::runtime_error("photon stream: missing v1 header");
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos) throw std::runtime_error("photon stream: truncated header");
  stream.duration_ps = std::strtoll(text.c_str() + header.size(), nullptr, 10);
  ++pos;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    if (eol > pos) stream.arrivals_ps.push_back(std::strtoll(text.c_str() + pos, nullptr, 10));
    pos = eol + 1;
  }
  return stream;
}

}  // namespace snspd
