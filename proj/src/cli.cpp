// SPDX-License-Identifier: Apache-2.0
#include "snspd/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "snspd/analysis.hpp"
#include "snspd/config.hpp"
#include "snspd/engine.hpp"
#include "snspd/io.hpp"

namespace snspd::cli {

namespace {

enum class DurationKnob { sim, sweep_cap, jitter, crosstalk, sde_cap, none };

ExperimentConfig prepare(const CliOptions& options, DurationKnob knob) {
  ExperimentConfig cfg = load_config_file(options.config_path);
  if (options.seed) cfg.seed = *options.seed;
  if (options.out_dir) cfg.output_dir = *options.out_dir;
  if (options.duration_ps) {
    std::int64_t d = *options.duration_ps;
    if (d <= 0) throw ConfigError("--duration must be positive");
    switch (knob) {
      case DurationKnob::sim: cfg.duration_ps = d; break;
      case DurationKnob::sweep_cap: cfg.sweep_max_point_duration_ps = d; break;
      case DurationKnob::jitter: cfg.jitter_duration_ps = d; break;
      case DurationKnob::crosstalk:
        cfg.xt_high_duration_ps = d;
        cfg.xt_low_duration_ps = d;
        break;
      case DurationKnob::sde_cap: cfg.sde_max_duration_ps = d; break;
      case DurationKnob::none: break;
    }
  }
  return cfg;
}

void write_echo(const ExperimentConfig& cfg) {
  ensure_directory(cfg.output_dir);
  write_text_atomic(path_join(cfg.output_dir, "effective_config.cfg"), render_config(cfg));
}

std::string fmt(const char* format, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

int run_command(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

// Planned per-point duration: long enough for the slowest element to reach
// the target count, clamped to [1 us, cap]. Planning uses the configured
// model; the estimator still sees only measured rates.
std::vector<std::int64_t> sweep_durations(const ExperimentConfig& cfg, const ArrayModel& array,
                                          const OperatingPoint& op) {
  std::vector<std::int64_t> durations;
  durations.reserve(cfg.sweep_db.size());
  for (double db : cfg.sweep_db) {
    double phi = cfg.sweep_base_rate_hz * std::pow(10.0, -db / 10.0);
    double slowest = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < n_elements; ++i) {
      const ElementModel& e = array.elements[i];
      double eps_w = efficiency_at(e.response, op.bias[i]) * e.coupling;
      double rate = eps_w * phi / (1.0 + eps_w * phi * e.dead_time * 1e-9) +
                    dark_rate_at(e.response, op.bias[i]);
      if (first || rate < slowest) slowest = rate;
      first = false;
    }
    double seconds = cfg.sweep_target_counts / std::max(slowest, 1e-12);
    std::int64_t ps = std::int64_t(std::min(seconds * 1e12, double(cfg.sweep_max_point_duration_ps)));
    durations.push_back(std::max<std::int64_t>(ps, 1'000'000));
  }
  return durations;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "attenuation_db,incident_rate";
  for (std::size_t ch = 0; ch < n_elements; ++ch) out += ",ch" + std::to_string(ch);
  out += "\n";
  for (const SweepPoint& p : sweep.points) {
    out += fmt("%.10g", p.attenuation_db) + "," + fmt("%.10g", p.incident_rate_hz);
    for (std::size_t ch = 0; ch < n_elements; ++ch)
      out += "," + fmt("%.10g", p.counted_rate_hz[ch]);
    out += "\n";
  }
  return out;
}

SweepResult run_config_sweep(const ExperimentConfig& cfg, const ArrayModel& array,
                             const OperatingPoint& op) {
  SimConfig base;
  base.array = array;
  base.op = op;
  base.source.kind = CwSource{cfg.sweep_base_rate_hz};
  base.source.attenuation_db = 0.0;
  base.duration_ps = 1;  // per-point durations substitute this
  base.seed = cfg.seed;
  base.instrument_jitter_fwhm_ps = cfg.instrument_jitter_fwhm_ps;
  return run_sweep(base, cfg.sweep_db, sweep_durations(cfg, array, op));
}

// Minimal CSV table reader for the report command: numeric fields parse to
// doubles, anything else (including "nan") to NaN except kept as text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
  CsvTable table;
  std::string text = read_text(path);
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    if (eol > pos) {
      std::string line = text.substr(pos, eol - pos);
      std::vector<std::string> fields;
      std::size_t p = 0;
      for (;;) {
        std::size_t comma = line.find(',', p);
        if (comma == std::string::npos) {
          fields.push_back(line.substr(p));
          break;
        }
        fields.push_back(line.substr(p, comma - p));
        p = comma + 1;
      }
      if (first) {
        table.header = fields;
        first = false;
      } else {
        table.rows.push_back(fields);
      }
    }
    pos = eol + 1;
  }
  return table;
}

double field_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

}  // namespace

int cmd_simulate(const CliOptions& options) {
  return run_command([&] {
    ExperimentConfig cfg = prepare(options, DurationKnob::sim);
    ArrayModel array = array_for(cfg, cfg.sim_regime);
    OperatingPoint op = operating_point_for(cfg, array);
    write_echo(cfg);

    SimConfig sim{array, op, cfg.source, cfg.duration_ps, cfg.seed,
                  cfg.instrument_jitter_fwhm_ps};
    std::vector<TimeTag> tags = simulate(sim);
    std::string text = options.measured
                           ? serialize_timetags_measured(tags, cfg.duration_ps, cfg.seed)
                           : serialize_timetags(tags, cfg.duration_ps, cfg.seed);
    std::string path = path_join(cfg.output_dir, "timetags.txt");
    write_text_atomic(path, text);

    std::array<double, n_elements> rates = count_rates(tags, cfg.duration_ps);
    for (std::size_t ch = 0; ch < n_elements; ++ch)
      std::printf("ch%02zu rate_hz=%.10g\n", ch, rates[ch]);
    std::printf("wrote %s (%zu tags)\n", path.c_str(), tags.size());
  });
}

int cmd_sweep(const CliOptions& options) {
  return run_command([&] {
    ExperimentConfig cfg = prepare(options, DurationKnob::sweep_cap);
    ArrayModel array = array_for(cfg, cfg.sim_regime);
    OperatingPoint op = operating_point_for(cfg, array);
    write_echo(cfg);

    SweepResult sweep = run_config_sweep(cfg, array, op);
    std::string path = path_join(cfg.output_dir, "sweep.csv");
    write_text_atomic(path, sweep_csv(sweep));
    std::printf("wrote %s (%zu points)\n", path.c_str(), sweep.points.size());
  });
}

int cmd_fit_reset(const CliOptions& options) {
  return run_command([&] {
    ExperimentConfig cfg = prepare(options, DurationKnob::sweep_cap);
    ArrayModel array = array_for(cfg, cfg.sim_regime);
    OperatingPoint op = operating_point_for(cfg, array);
    write_echo(cfg);

    SweepResult sweep = run_config_sweep(cfg, array, op);
    write_text_atomic(path_join(cfg.output_dir, "sweep.csv"), sweep_csv(sweep));

    std::string csv = "channel,tau_ns,eps,dark_hz,residual\n";
    std::size_t failures = 0;
    for (std::size_t ch = 0; ch < n_elements; ++ch) {
      try {
        ResetFit fit = fit_reset_time(sweep, int(ch), array.elements[ch].coupling);
        csv += std::to_string(ch) + "," + fmt("%.10g", fit.tau_ns) + "," + fmt("%.10g", fit.eps) +
               "," + fmt("%.10g", fit.dark_hz) + "," + fmt("%.10g", fit.residual_norm) + "\n";
        if (fit.tau_unconstrained)
          std::printf("channel %zu: tau unconstrained (no saturation signal in sweep range)\n",
                      ch);
      } catch (const std::exception& e) {
        ++failures;
        csv += std::to_string(ch) + ",nan,nan,nan,nan\n";
        std::fprintf(stderr, "channel %zu: %s\n", ch, e.what());
      }
    }
    std::string path = path_join(cfg.output_dir, "reset_fits.csv");
    write_text_atomic(path, csv);
    std::printf("wrote %s\n", path.c_str());
    if (failures == n_elements) throw std::runtime_error("reset-time fit failed on every channel");
  });
}

int cmd_jitter(const CliOptions& options) {
  return run_command([&] {
    ExperimentConfig cfg = prepare(options, DurationKnob::jitter);
    ArrayModel array = array_for(cfg, cfg.sim_regime);
    OperatingPoint op = operating_point_for(cfg, array);
    write_echo(cfg);

    JitterExperimentResult result = jitter_experiment(
        array, op, cfg.jitter_rep_rate_hz, cfg.jitter_mu, cfg.jitter_pulse_fwhm_ps,
        cfg.instrument_jitter_fwhm_ps, cfg.jitter_duration_ps, cfg.seed, cfg.jitter_bin_ps);
    std::array<bool, n_elements> outliers = flag_jitter_outliers(result);

    std::string csv = "channel,j_meas_ps,j_snspd_ps\n";
    std::size_t failures = 0;
    for (std::size_t ch = 0; ch < n_elements; ++ch) {
      const ChannelJitter& c = result.channels[ch];
      if (c.error.empty()) {
        csv += std::to_string(ch) + "," + fmt("%.10g", c.budget.j_meas_ps) + "," +
               fmt("%.10g", c.budget.j_snspd_ps) + "\n";
        if (outliers[ch])
          std::printf("channel %zu: jitter outlier (%.4g ps vs population)\n", ch,
                      c.budget.j_snspd_ps);
      } else {
        ++failures;
        csv += std::to_string(ch) + ",nan,nan\n";
        std::fprintf(stderr, "channel %zu: %s\n", ch, c.error.c_str());
      }
    }
    std::string path = path_join(cfg.output_dir, "jitter.csv");
    write_text_atomic(path, csv);
    std::printf("wrote %s\n", path.c_str());
    if (failures == n_elements)
      throw std::runtime_error("jitter estimation failed on every channel");
  });
}

int cmd_crosstalk(const CliOptions& options) {
  return run_command([&] {
    if (options.regime != "high" && options.regime != "low" && options.regime != "both")
      throw ConfigError("--regime must be high, low, or both");
    ExperimentConfig cfg = prepare(options, DurationKnob::crosstalk);
    write_echo(cfg);

    CrosstalkOptions xt_options;
    xt_options.delay_pair = std::pair<int, int>{cfg.xt_delay_pair[0], cfg.xt_delay_pair[1]};
    xt_options.delay_bin_ps = cfg.xt_delay_bin_ps;

    std::string csv = "i,j,regime,percent\n";
    std::string delay_csv = "regime,i,j,bin_start_ps,count\n";
    bool any_hist = false;
    for (CrosstalkRegime regime : {CrosstalkRegime::high_bias, CrosstalkRegime::low_bias}) {
      const char* name = regime_name(regime);
      if (options.regime != "both" && options.regime != name) continue;
      ArrayModel array = array_for(cfg, regime);
      bool high = regime == CrosstalkRegime::high_bias;
      CrosstalkEstimate estimate = estimate_crosstalk(
          array, high ? cfg.xt_high_base_hz : cfg.xt_low_base_hz,
          high ? cfg.xt_high_aggressor_hz : cfg.xt_low_aggressor_hz,
          high ? cfg.xt_high_duration_ps : cfg.xt_low_duration_ps, cfg.seed, regime, xt_options);
      for (std::size_t i = 0; i < n_elements; ++i)
        for (std::size_t j = 0; j < n_elements; ++j)
          if (i != j)
            csv += std::to_string(i) + "," + std::to_string(j) + "," + name + "," +
                   fmt("%.10g", estimate.percent[i][j]) + "\n";
      if (estimate.delay_hist) {
        const DelayHistogram& hist = *estimate.delay_hist;
        for (std::size_t b = 0; b < hist.counts.size(); ++b)
          delay_csv += std::string(name) + "," + std::to_string(hist.start_channel) + "," +
                       std::to_string(hist.stop_channel) + "," +
                       std::to_string(std::int64_t(b) * hist.bin_width_ps) + "," +
                       std::to_string(hist.counts[b]) + "\n";
        any_hist = true;
      }
    }
    std::string path = path_join(cfg.output_dir, "crosstalk.csv");
    write_text_atomic(path, csv);
    std::printf("wrote %s\n", path.c_str());
    if (any_hist) {
      std::string hist_path = path_join(cfg.output_dir, "xtalk_delay.csv");
      write_text_atomic(hist_path, delay_csv);
      std::printf("wrote %s\n", hist_path.c_str());
    }
  });
}

int cmd_sde_curve(const CliOptions& options) {
  return run_command([&] {
    ExperimentConfig cfg = prepare(options, DurationKnob::sde_cap);
    ArrayModel array = array_for(cfg, cfg.sim_regime);
    OperatingPoint op = operating_point_for(cfg, array);
    write_echo(cfg);

    std::vector<std::int64_t> durations;
    durations.reserve(cfg.sde_flux_hz.size());
    for (double flux : cfg.sde_flux_hz) {
      double seconds = cfg.sde_target_photons / std::max(flux, 1.0);
      std::int64_t ps = std::int64_t(std::min(seconds * 1e12, double(cfg.sde_max_duration_ps)));
      durations.push_back(std::max<std::int64_t>(ps, 1'000'000));
    }
    std::vector<std::pair<double, double>> curve =
        sde_vs_flux_mc(array, op, cfg.sde_flux_hz, durations, cfg.seed);

    std::string csv = "flux_hz,sde_mc,sde_analytic\n";
    for (const auto& [flux, sde_mc] : curve)
      csv += fmt("%.10g", flux) + "," + fmt("%.10g", sde_mc) + "," +
             fmt("%.10g", sde_vs_flux(array, op, flux)) + "\n";
    std::string path = path_join(cfg.output_dir, "sde_curve.csv");
    write_text_atomic(path, csv);
    std::printf("wrote %s (%zu flux points)\n", path.c_str(), curve.size());
  });
}

int cmd_report(const CliOptions& options) {
  return run_command([&] {
    ExperimentConfig cfg = prepare(options, DurationKnob::none);
    const std::string& dir = cfg.output_dir;
    std::string text = "detector array summary\n======================\n";
    std::vector<std::string> missing;

    std::string sde_path = path_join(dir, "sde_curve.csv");
    if (file_exists(sde_path)) {
      CsvTable table = read_csv(sde_path);
      double best = 0.0, best_mc = 0.0, best_model = 0.0;
      bool found = false;
      for (const auto& row : table.rows) {
        if (row.size() < 3) continue;
        double flux = field_double(row[0]);
        if (!found || std::fabs(flux - cfg.report_reference_flux_hz) <
                          std::fabs(best - cfg.report_reference_flux_hz)) {
          best = flux;
          best_mc = field_double(row[1]);
          best_model = field_double(row[2]);
          found = true;
        }
      }
      if (found)
        text += "\nnet SDE at " + fmt("%.4g", best) + " photons/s: " +
                fmt("%.2f", 100.0 * best_mc) + "% (Monte Carlo), " +
                fmt("%.2f", 100.0 * best_model) + "% (analytic model)\n";
      else
        missing.push_back("sde_curve.csv (no data rows)");
    } else {
      missing.push_back("sde_curve.csv");
    }

    std::string fits_path = path_join(dir, "reset_fits.csv");
    if (file_exists(fits_path)) {
      CsvTable table = read_csv(fits_path);
      std::vector<double> taus;
      for (const auto& row : table.rows)
        if (row.size() >= 2 && !std::isnan(field_double(row[1])))
          taus.push_back(field_double(row[1]));
      if (!taus.empty()) {
        double mean = 0.0;
        for (double t : taus) mean += t;
        mean /= double(taus.size());
        double var = 0.0;
        for (double t : taus) var += (t - mean) * (t - mean);
        double std_dev = taus.size() > 1 ? std::sqrt(var / double(taus.size() - 1)) : 0.0;
        double mean_recip = 0.0;
        for (double t : taus) mean_recip += 1e9 / t;
        mean_recip /= double(taus.size());
        text += "\nreset time: mean " + fmt("%.4g", mean) + " ns, std " + fmt("%.3g", std_dev) +
                " ns (" + std::to_string(taus.size()) + " channels)\n";
        text += "max full-efficiency rate: " + fmt("%.5g", mean_recip / 1e6) +
                " MHz (mean of per-channel 1/tau), " + fmt("%.5g", 1e3 / mean) +
                " MHz (1/mean tau)\n";
      } else {
        missing.push_back("reset_fits.csv (no usable fits)");
      }
    } else {
      missing.push_back("reset_fits.csv");
    }

    std::string jitter_path = path_join(dir, "jitter.csv");
    if (file_exists(jitter_path)) {
      CsvTable table = read_csv(jitter_path);
      std::vector<double> jitters;
      for (const auto& row : table.rows)
        if (row.size() >= 3 && !std::isnan(field_double(row[2])))
          jitters.push_back(field_double(row[2]));
      if (!jitters.empty()) {
        double mean = 0.0;
        for (double j : jitters) mean += j;
        mean /= double(jitters.size());
        double var = 0.0;
        for (double j : jitters) var += (j - mean) * (j - mean);
        double std_dev = jitters.size() > 1 ? std::sqrt(var / double(jitters.size() - 1)) : 0.0;
        text += "\ndevice jitter: mean " + fmt("%.4g", mean) + " ps FWHM, std " +
                fmt("%.3g", std_dev) + " ps (" + std::to_string(jitters.size()) + " channels)\n";
      } else {
        missing.push_back("jitter.csv (no usable channels)");
      }
    } else {
      missing.push_back("jitter.csv");
    }

    std::string xt_path = path_join(dir, "crosstalk.csv");
    if (file_exists(xt_path)) {
      CsvTable table = read_csv(xt_path);
      bool any = false;
      for (const char* regime : {"high", "low"}) {
        double max_percent = -1.0;
        int max_i = 0, max_j = 0;
        for (const auto& row : table.rows) {
          if (row.size() < 4 || row[2] != regime) continue;
          double percent = field_double(row[3]);
          if (percent > max_percent) {
            max_percent = percent;
            max_i = int(field_double(row[0]));
            max_j = int(field_double(row[1]));
          }
        }
        if (max_percent >= 0.0) {
          if (!any) text += "\n";
          any = true;
          text += std::string("max crosstalk (") + regime + " regime): " +
                  fmt("%.3g", max_percent) + "% (pair " + std::to_string(max_i) + "->" +
                  std::to_string(max_j) + ")\n";
        }
      }
      if (!any) missing.push_back("crosstalk.csv (no data rows)");
    } else {
      missing.push_back("crosstalk.csv");
    }

    if (missing.size() >= 4) {
      std::string list;
      for (const std::string& name : missing) list += "\n  " + name;
      throw std::runtime_error("report: no inputs found in " + dir + list);
    }
    if (!missing.empty()) {
      text += "\nmissing inputs:\n";
      for (const std::string& name : missing) text += "  " + name + ": missing\n";
    }
    std::string path = path_join(dir, "report.txt");
    ensure_directory(dir);
    write_text_atomic(path, text);
    std::fputs(text.c_str(), stdout);
    std::printf("wrote %s\n", path.c_str());
  });
}

}  // namespace snspd::cli
