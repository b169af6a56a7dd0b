// SPDX-License-Identifier: Apache-2.0
#include "snspd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snspd/fit.hpp"
#include "snspd/rng.hpp"

namespace snspd {

const char* regime_name(CrosstalkRegime regime) {
  return regime == CrosstalkRegime::high_bias ? "high" : "low";
}

std::int64_t DelayHistogram::peak_center_ps() const {
  if (counts.empty()) return 0;
  std::size_t peak = 0;
  for (std::size_t b = 1; b < counts.size(); ++b)
    if (counts[b] > counts[peak]) peak = b;
  return std::int64_t(peak) * bin_width_ps + bin_width_ps / 2;
}

SweepResult run_sweep(const SimConfig& base, const std::vector<double>& db_list,
                      const std::vector<std::int64_t>& durations_ps) {
  if (db_list.empty()) throw std::invalid_argument("run_sweep: empty attenuation list");
  if (durations_ps.size() != 1 && durations_ps.size() != db_list.size())
    throw std::invalid_argument("run_sweep: need one duration, or one per attenuation");
  SweepResult sweep;
  sweep.points.reserve(db_list.size());
  for (std::size_t k = 0; k < db_list.size(); ++k) {
    SimConfig cfg = base;
    cfg.source.attenuation_db = db_list[k];
    cfg.duration_ps = durations_ps.size() == 1 ? durations_ps[0] : durations_ps[k];
    cfg.seed = derive_seed(base.seed, purpose::sweep_point, k);
    std::vector<TimeTag> tags = simulate(cfg);
    SweepPoint point;
    point.attenuation_db = db_list[k];
    point.incident_rate_hz = source_mean_rate(cfg.source);
    point.counted_rate_hz = count_rates(tags, cfg.duration_ps);
    point.duration_ps = cfg.duration_ps;
    sweep.points.push_back(point);
  }
  return sweep;
}

ResetFit fit_reset_time(const SweepResult& sweep, int channel, double coupling_weight) {
  if (channel < 0 || std::size_t(channel) >= n_elements)
    throw std::invalid_argument("fit_reset_time: channel out of range");
  if (!(coupling_weight > 0.0))
    throw std::invalid_argument("fit_reset_time: coupling weight must be positive");
  const std::size_t m = sweep.points.size();
  if (m < 6) throw std::invalid_argument("fit_reset_time: need at least 6 sweep points");

  std::vector<double> phi(m), y(m);
  double phi_min = 0.0, phi_max = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    phi[k] = sweep.points[k].incident_rate_hz * coupling_weight;
    y[k] = sweep.points[k].counted_rate_hz[std::size_t(channel)];
    if (k == 0 || phi[k] < phi_min) phi_min = phi[k];
    if (k == 0 || phi[k] > phi_max) phi_max = phi[k];
  }
  if (!(phi_min > 0.0) || phi_max / phi_min < 1e3)
    throw std::invalid_argument("fit_reset_time: sweep must span at least 3 decades");

  // Relative residuals keep the five-decade dynamic range balanced; a
  // zero-count point falls back to an absolute residual.
  auto residuals = [&](const std::vector<double>& p, std::vector<double>& r) {
    r.resize(m);
    double eps = p[0], tau_s = p[1] * 1e-9, dark = p[2];
    for (std::size_t k = 0; k < m; ++k) {
      double model = eps * phi[k] / (1.0 + eps * phi[k] * tau_s) + dark;
      r[k] = (model - y[k]) / (y[k] > 0.0 ? y[k] : 1.0);
    }
  };

  // The darkest available point anchors the initial guesses: split its rate
  // between dark floor and photon response.
  std::size_t lowest = 0;
  for (std::size_t k = 1; k < m; ++k)
    if (phi[k] < phi[lowest]) lowest = k;
  double dark0 = 0.5 * y[lowest];
  double eps0 = std::clamp((y[lowest] - dark0) / phi[lowest], 1e-9, 1.0);
  std::vector<double> p0 = {eps0, 5.0, dark0};
  std::vector<double> lower = {0.0, 0.0, 0.0};
  std::vector<double> upper = {1.0, 1000.0, 1e18};
  FitOptions options;
  options.typical = {0.1, 1.0, std::max(1.0, dark0)};

  FitResult result;
  try {
    result = fit_least_squares(residuals, p0, lower, upper, options);
  } catch (const FitError& e) {
    ResetFit best;
    best.eps = e.best.params[0];
    best.tau_ns = e.best.params[1];
    best.dark_hz = e.best.params[2];
    best.residual_norm = std::sqrt(e.best.cost / double(m));
    throw ResetFitError("reset-time fit did not converge", best);
  }

  ResetFit fit;
  fit.eps = result.params[0];
  fit.tau_ns = result.params[1];
  fit.dark_hz = result.params[2];
  fit.residual_norm = std::sqrt(result.cost / double(m));
  fit.tau_unconstrained = phi_max * fit.tau_ns * 1e-9 < 0.1;
  return fit;
}

double max_full_rate_hz(const ResetFit& fit) {
  if (!(fit.tau_ns > 0.0)) throw std::runtime_error("max rate unbounded: tau is zero");
  return 1e9 / fit.tau_ns;
}

double deconvolve_jitter(double j_meas, double j_tt, double j_pulse) {
  if (!(j_meas >= 0.0) || !(j_tt >= 0.0) || !(j_pulse >= 0.0))
    throw std::invalid_argument("deconvolve_jitter: inputs must be nonnegative");
  double sq = j_meas * j_meas - j_tt * j_tt - j_pulse * j_pulse;
  if (sq < 0.0)
    throw std::runtime_error("unphysical budget: measured jitter below the instrument floor");
  return std::sqrt(sq);
}

double fwhm_of_histogram(const std::vector<double>& samples, double bin_width) {
  if (samples.size() < 1000)
    throw std::invalid_argument("fwhm_of_histogram: need at least 1000 samples");
  if (!(bin_width > 0.0)) throw std::invalid_argument("fwhm_of_histogram: bin width must be positive");
  auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  double lo = *lo_it, hi = *hi_it;
  std::size_t n_bins = std::size_t((hi - lo) / bin_width) + 1;
  if (n_bins > std::size_t(5e7))
    throw std::invalid_argument("fwhm_of_histogram: bin width too small for the sample range");
  std::vector<std::uint64_t> counts(n_bins, 0);
  for (double s : samples) {
    std::size_t b = std::size_t((s - lo) / bin_width);
    if (b >= n_bins) b = n_bins - 1;
    ++counts[b];
  }

  std::size_t peak = 0;
  for (std::size_t b = 1; b < n_bins; ++b)
    if (counts[b] > counts[peak]) peak = b;
  double half = double(counts[peak]) / 2.0;
  if (!(half > 0.0)) throw std::runtime_error("no FWHM: histogram has no peak");

  auto center = [&](std::ptrdiff_t b) { return lo + (double(b) + 0.5) * bin_width; };
  auto count_at = [&](std::ptrdiff_t b) {
    return (b < 0 || b >= std::ptrdiff_t(n_bins)) ? 0.0 : double(counts[std::size_t(b)]);
  };

  // Outermost crossings: first and last bins at or above half maximum, with
  // the empty space beyond the histogram counting as zero.
  std::ptrdiff_t first = -1, last = -1;
  for (std::ptrdiff_t b = 0; b < std::ptrdiff_t(n_bins); ++b) {
    if (count_at(b) >= half) {
      if (first < 0) first = b;
      last = b;
    }
  }
  if (first < 0) throw std::runtime_error("no FWHM: no half-maximum crossing");
  double left = center(first - 1) +
                bin_width * (half - count_at(first - 1)) / (count_at(first) - count_at(first - 1));
  double right = center(last) +
                 bin_width * (count_at(last) - half) / (count_at(last) - count_at(last + 1));
  return right - left;
}

JitterExperimentResult jitter_experiment(const ArrayModel& array, const OperatingPoint& op,
                                         double rep_rate_hz, double mu, double j_pulse_fwhm_ps,
                                         double j_tt_fwhm_ps, std::int64_t duration_ps,
                                         std::uint64_t seed, double bin_ps) {
  if (!(rep_rate_hz > 0.0)) throw std::invalid_argument("jitter_experiment: rep_rate must be positive");
  SimConfig cfg;
  cfg.array = array;
  cfg.op = op;
  cfg.source.kind = PulsedSource{rep_rate_hz, j_pulse_fwhm_ps, mu};
  cfg.source.attenuation_db = 0.0;
  cfg.duration_ps = duration_ps;
  cfg.seed = seed;
  cfg.instrument_jitter_fwhm_ps = j_tt_fwhm_ps;
  std::vector<TimeTag> tags = simulate(cfg);

  double period_ps = 1e12 / rep_rate_hz;
  std::array<std::vector<double>, n_elements> folded;
  for (const TimeTag& t : tags) {
    // Residual against the nearest pulse, centered so the peak is not split
    // across the period boundary. Only (channel, time) is used: the
    // estimator sees measured data.
    double r = double(t.time_ps) - std::round(double(t.time_ps) / period_ps) * period_ps;
    folded[std::size_t(t.channel)].push_back(r);
  }
  tags = {};

  JitterExperimentResult result;
  for (std::size_t ch = 0; ch < n_elements; ++ch) {
    ChannelJitter& out = result.channels[ch];
    out.n_samples = folded[ch].size();
    out.budget.j_tt_ps = j_tt_fwhm_ps;
    out.budget.j_pulse_ps = j_pulse_fwhm_ps;
    try {
      out.budget.j_meas_ps = fwhm_of_histogram(folded[ch], bin_ps);
      out.budget.j_snspd_ps =
          deconvolve_jitter(out.budget.j_meas_ps, j_tt_fwhm_ps, j_pulse_fwhm_ps);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    folded[ch] = {};
  }
  return result;
}

std::array<bool, n_elements> flag_jitter_outliers(const JitterExperimentResult& result) {
  std::vector<double> values;
  for (const ChannelJitter& ch : result.channels)
    if (ch.error.empty()) values.push_back(ch.budget.j_snspd_ps);
  std::array<bool, n_elements> flags{};
  if (values.size() < 4) return flags;

  auto median_of = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
  };
  double med = median_of(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::fabs(v - med));
  double mad = median_of(dev);
  // 1.4826 scales MAD to a Gaussian sigma; the 3 ps floor keeps a tight
  // population from flagging its own statistical scatter.
  double threshold = std::max(5.0 * 1.4826 * mad, 3.0);
  for (std::size_t ch = 0; ch < n_elements; ++ch) {
    const ChannelJitter& c = result.channels[ch];
    if (c.error.empty() && std::fabs(c.budget.j_snspd_ps - med) > threshold) flags[ch] = true;
  }
  return flags;
}

namespace {

std::array<std::uint64_t, n_elements> channel_counts(const std::vector<TimeTag>& tags) {
  std::array<std::uint64_t, n_elements> counts{};
  for (const TimeTag& t : tags) ++counts[std::size_t(t.channel)];
  return counts;
}

DelayHistogram build_delay_histogram(const std::vector<TimeTag>& tags, int start_ch, int stop_ch,
                                     std::int64_t bin_ps, std::int64_t window_ps) {
  DelayHistogram hist;
  hist.start_channel = start_ch;
  hist.stop_channel = stop_ch;
  hist.bin_width_ps = bin_ps;
  hist.counts.assign(std::size_t((window_ps + bin_ps - 1) / bin_ps), 0);
  std::vector<std::int64_t> starts, stops;
  for (const TimeTag& t : tags) {
    if (t.channel == start_ch) starts.push_back(t.time_ps);
    if (t.channel == stop_ch) stops.push_back(t.time_ps);
  }
  std::sort(starts.begin(), starts.end());
  std::sort(stops.begin(), stops.end());
  std::size_t cursor = 0;
  for (std::int64_t t0 : starts) {
    while (cursor < stops.size() && stops[cursor] < t0) ++cursor;
    if (cursor == stops.size()) break;
    std::int64_t delta = stops[cursor] - t0;
    if (delta < window_ps) ++hist.counts[std::size_t(delta / bin_ps)];
  }
  return hist;
}

}  // namespace

CrosstalkEstimate estimate_crosstalk(const ArrayModel& array, double base_dark_hz,
                                     double aggressor_dark_hz, std::int64_t duration_ps,
                                     std::uint64_t seed, CrosstalkRegime regime,
                                     const CrosstalkOptions& options) {
  if (!(aggressor_dark_hz > base_dark_hz))
    throw std::invalid_argument("estimate_crosstalk: aggressor target must exceed the base target");
  if (options.delay_pair) {
    auto [a, b] = *options.delay_pair;
    if (a < 0 || b < 0 || a >= int(n_elements) || b >= int(n_elements) || a == b)
      throw std::invalid_argument("estimate_crosstalk: invalid delay pair");
    if (options.delay_bin_ps <= 0 || options.delay_window_ps <= 0)
      throw std::invalid_argument("estimate_crosstalk: delay bin and window must be positive");
  }
  CrosstalkEstimate estimate;
  estimate.regime = regime;

  SimConfig cfg;
  cfg.array = array;
  cfg.source.kind = CwSource{0.0};  // dark-count protocol: no light
  cfg.duration_ps = duration_ps;
  cfg.seed = seed;
  cfg.instrument_jitter_fwhm_ps = 0.0;
  OperatingPoint base_op = operating_point_for_dark_rate(array, base_dark_hz);

  // The baseline and every aggressor run share the master seed, so each
  // victim's dark stream is identical across runs and cancels exactly in
  // the subtraction; only crosstalk-induced counts remain.
  cfg.op = base_op;
  std::array<std::uint64_t, n_elements> baseline = channel_counts(simulate(cfg));

  for (std::size_t i = 0; i < n_elements; ++i) {
    cfg.op = base_op;
    cfg.op.bias[i] = bias_for_dark_rate(array.elements[i].response, aggressor_dark_hz);
    std::vector<TimeTag> tags = simulate(cfg);
    std::array<std::uint64_t, n_elements> counts = channel_counts(tags);
    for (std::size_t j = 0; j < n_elements; ++j) {
      if (j == i) continue;
      double diff = double(counts[j]) - double(baseline[j]);
      if (diff < 0.0) {
        diff = 0.0;
        estimate.clamped[i][j] = true;
      }
      estimate.percent[i][j] = counts[i] > 0 ? 100.0 * diff / double(counts[i]) : 0.0;
    }
    if (options.delay_pair && options.delay_pair->first == int(i)) {
      estimate.delay_hist =
          build_delay_histogram(tags, options.delay_pair->first, options.delay_pair->second,
                                options.delay_bin_ps, options.delay_window_ps);
    }
  }
  return estimate;
}

std::vector<std::pair<double, double>> sde_vs_flux_mc(const ArrayModel& array,
                                                      const OperatingPoint& op,
                                                      const std::vector<double>& flux_list_hz,
                                                      const std::vector<std::int64_t>& durations_ps,
                                                      std::uint64_t seed) {
  if (flux_list_hz.empty()) throw std::invalid_argument("sde_vs_flux_mc: empty flux list");
  if (durations_ps.size() != 1 && durations_ps.size() != flux_list_hz.size())
    throw std::invalid_argument("sde_vs_flux_mc: need one duration, or one per flux");
  std::vector<std::pair<double, double>> curve;
  curve.reserve(flux_list_hz.size());
  for (std::size_t k = 0; k < flux_list_hz.size(); ++k) {
    SimConfig cfg;
    cfg.array = array;
    cfg.op = op;
    cfg.source.kind = CwSource{flux_list_hz[k]};
    cfg.duration_ps = durations_ps.size() == 1 ? durations_ps[0] : durations_ps[k];
    cfg.seed = derive_seed(seed, purpose::sde_point, k);
    SimResult run = simulate_full(cfg);
    std::uint64_t detected = 0;
    for (const TimeTag& t : run.tags)
      if (t.origin == TagOrigin::photon) ++detected;
    double sde = run.incident_photons > 0 ? double(detected) / double(run.incident_photons) : 0.0;
    curve.push_back({flux_list_hz[k], sde});
  }
  return curve;
}

}  // namespace snspd
