// SPDX-License-Identifier: Apache-2.0
#include "snspd/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>

#include "snspd/io.hpp"

namespace snspd {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    std::size_t next = s.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (!end || *end != '\0' || value.empty())
    throw ConfigError("invalid number for " + key + ": '" + value + "'");
  return v;
}

std::int64_t parse_int64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  long long v = std::strtoll(value.c_str(), &end, 10);
  if (end && *end == '\0' && !value.empty()) return v;
  // Durations are often written in scientific notation; accept any double
  // that is exactly an integer.
  double d = parse_double(key, value);
  if (std::fabs(d) > 9.2e18 || d != std::floor(d))
    throw ConfigError("invalid integer for " + key + ": '" + value + "'");
  return std::int64_t(d);
}

std::uint64_t parse_uint64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (!end || *end != '\0' || value.empty() || value[0] == '-')
    throw ConfigError("invalid unsigned integer for " + key + ": '" + value + "'");
  return v;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const std::string& item : split(value, ',')) {
    std::string t = trim(item);
    if (t.empty()) throw ConfigError("empty entry in list for " + key);
    out.push_back(parse_double(key, t));
  }
  return out;
}

int parse_element_index(const std::string& key, const std::string& token) {
  char* end = nullptr;
  long v = std::strtol(token.c_str(), &end, 10);
  if (!end || *end != '\0' || token.empty() || v < 0 || v >= long(n_elements))
    throw ConfigError("bad element index in " + key + ": '" + token + "'");
  return int(v);
}

// Shortest decimal form that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void assign_element_field(ExperimentConfig& cfg, const std::string& key, const std::string& selector,
                          const std::string& field, const std::string& value) {
  double v = parse_double(key, value);
  auto apply = [&](ElementModel& e) {
    if (field == "i_switch_ua") e.response.i_switch = v;
    else if (field == "i_mid_ua") e.response.i_mid = v;
    else if (field == "i_width_ua") e.response.i_width = v;
    else if (field == "eps_max") e.response.eps_max = v;
    else if (field == "d_switch_hz") e.response.d_switch = v;
    else if (field == "d_decade_ua") e.response.d_decade = v;
    else if (field == "dead_time_ns") e.dead_time = v;
    else if (field == "jitter_fwhm_ps") e.jitter_fwhm = v;
    else if (field == "coupling") e.coupling = v;
    else throw ConfigError("unknown config key: " + key);
  };
  if (selector == "all") {
    for (ElementModel& e : cfg.elements) apply(e);
  } else {
    apply(cfg.elements[std::size_t(parse_element_index(key, selector))]);
  }
}

void assign_matrix(Matrix16& m, const std::string& key, const std::vector<std::string>& tail,
                   const std::string& value) {
  double v = parse_double(key, value);
  if (tail.size() == 1 && tail[0] == "all") {
    for (std::size_t i = 0; i < n_elements; ++i)
      for (std::size_t j = 0; j < n_elements; ++j)
        if (i != j) m[i][j] = v;
    return;
  }
  if (tail.size() == 2) {
    int i = parse_element_index(key, tail[0]);
    int j = parse_element_index(key, tail[1]);
    m[std::size_t(i)][std::size_t(j)] = v;
    return;
  }
  throw ConfigError("unknown config key: " + key);
}

void assign(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  std::vector<std::string> parts = split(key, '.');
  const std::string& head = parts[0];

  if (head == "element" && parts.size() == 3) {
    assign_element_field(cfg, key, parts[1], parts[2], value);
    return;
  }
  if (head == "crosstalk" && parts.size() >= 3) {
    std::vector<std::string> tail(parts.begin() + 2, parts.end());
    if (parts[1] == "high") return assign_matrix(cfg.xtalk_high, key, tail, value);
    if (parts[1] == "low") return assign_matrix(cfg.xtalk_low, key, tail, value);
    if (parts[1] == "delay_ns") return assign_matrix(cfg.xtalk_delay, key, tail, value);
    throw ConfigError("unknown config key: " + key);
  }
  if (head == "bias") {
    if (parts.size() == 2 && parts[1] == "dark_target_hz") {
      cfg.dark_target_hz = parse_double(key, value);
      return;
    }
    if (parts.size() == 2 && parts[1] == "net_dark_target_hz") {
      cfg.net_dark_target_hz = parse_double(key, value);
      return;
    }
    if (parts.size() == 3 && parts[2] == "current_ua") {
      cfg.bias_override[std::size_t(parse_element_index(key, parts[1]))] =
          parse_double(key, value);
      return;
    }
    throw ConfigError("unknown config key: " + key);
  }
  if (head == "source" && parts.size() == 2) {
    const std::string& field = parts[1];
    if (field == "kind") {
      if (value == "cw") {
        if (!std::holds_alternative<CwSource>(cfg.source.kind)) cfg.source.kind = CwSource{};
      } else if (value == "pulsed") {
        if (!std::holds_alternative<PulsedSource>(cfg.source.kind))
          cfg.source.kind = PulsedSource{};
      } else {
        throw ConfigError("invalid value for " + key + ": '" + value + "'");
      }
      return;
    }
    if (field == "rate_hz") {
      if (!std::holds_alternative<CwSource>(cfg.source.kind))
        throw ConfigError(key + " requires source.kind = cw (set kind first)");
      std::get<CwSource>(cfg.source.kind).rate_hz = parse_double(key, value);
      return;
    }
    if (field == "rep_rate_hz" || field == "pulse_fwhm_ps" || field == "mean_photons_per_pulse") {
      if (!std::holds_alternative<PulsedSource>(cfg.source.kind))
        throw ConfigError(key + " requires source.kind = pulsed (set kind first)");
      PulsedSource& p = std::get<PulsedSource>(cfg.source.kind);
      double v = parse_double(key, value);
      if (field == "rep_rate_hz") p.rep_rate_hz = v;
      else if (field == "pulse_fwhm_ps") p.pulse_fwhm_ps = v;
      else p.mean_photons_per_pulse = v;
      return;
    }
    if (field == "attenuation_db") {
      cfg.source.attenuation_db = parse_double(key, value);
      return;
    }
    throw ConfigError("unknown config key: " + key);
  }
  if (head == "sim" && parts.size() == 2) {
    const std::string& field = parts[1];
    if (field == "duration_ps") cfg.duration_ps = parse_int64(key, value);
    else if (field == "seed") cfg.seed = parse_uint64(key, value);
    else if (field == "instrument_jitter_fwhm_ps")
      cfg.instrument_jitter_fwhm_ps = parse_double(key, value);
    else if (field == "xtalk_regime") {
      if (value == "high") cfg.sim_regime = CrosstalkRegime::high_bias;
      else if (value == "low") cfg.sim_regime = CrosstalkRegime::low_bias;
      else throw ConfigError("invalid value for " + key + ": '" + value + "'");
    } else throw ConfigError("unknown config key: " + key);
    return;
  }
  if (head == "sweep" && parts.size() == 2) {
    const std::string& field = parts[1];
    if (field == "db_list") cfg.sweep_db = parse_double_list(key, value);
    else if (field == "base_rate_hz") cfg.sweep_base_rate_hz = parse_double(key, value);
    else if (field == "target_counts") cfg.sweep_target_counts = parse_double(key, value);
    else if (field == "max_point_duration_ps")
      cfg.sweep_max_point_duration_ps = parse_int64(key, value);
    else throw ConfigError("unknown config key: " + key);
    return;
  }
  if (head == "jitter" && parts.size() == 2) {
    const std::string& field = parts[1];
    if (field == "rep_rate_hz") cfg.jitter_rep_rate_hz = parse_double(key, value);
    else if (field == "mean_photons_per_pulse") cfg.jitter_mu = parse_double(key, value);
    else if (field == "pulse_fwhm_ps") cfg.jitter_pulse_fwhm_ps = parse_double(key, value);
    else if (field == "duration_ps") cfg.jitter_duration_ps = parse_int64(key, value);
    else if (field == "bin_ps") cfg.jitter_bin_ps = parse_double(key, value);
    else throw ConfigError("unknown config key: " + key);
    return;
  }
  if (head == "xtalk") {
    if (parts.size() == 3 && (parts[1] == "high" || parts[1] == "low")) {
      bool high = parts[1] == "high";
      const std::string& field = parts[2];
      if (field == "base_dark_hz")
        (high ? cfg.xt_high_base_hz : cfg.xt_low_base_hz) = parse_double(key, value);
      else if (field == "aggressor_dark_hz")
        (high ? cfg.xt_high_aggressor_hz : cfg.xt_low_aggressor_hz) = parse_double(key, value);
      else if (field == "duration_ps")
        (high ? cfg.xt_high_duration_ps : cfg.xt_low_duration_ps) = parse_int64(key, value);
      else throw ConfigError("unknown config key: " + key);
      return;
    }
    if (parts.size() == 2 && parts[1] == "delay_pair") {
      std::vector<double> pair = parse_double_list(key, value);
      if (pair.size() != 2) throw ConfigError("delay pair needs two channels: " + key);
      cfg.xt_delay_pair = {parse_element_index(key, trim(split(value, ',')[0])),
                           parse_element_index(key, trim(split(value, ',')[1]))};
      return;
    }
    if (parts.size() == 2 && parts[1] == "delay_bin_ps") {
      cfg.xt_delay_bin_ps = parse_int64(key, value);
      return;
    }
    throw ConfigError("unknown config key: " + key);
  }
  if (head == "sde" && parts.size() == 2) {
    const std::string& field = parts[1];
    if (field == "flux_list_hz") cfg.sde_flux_hz = parse_double_list(key, value);
    else if (field == "target_photons") cfg.sde_target_photons = parse_double(key, value);
    else if (field == "max_duration_ps") cfg.sde_max_duration_ps = parse_int64(key, value);
    else throw ConfigError("unknown config key: " + key);
    return;
  }
  if (head == "report" && parts.size() == 2 && parts[1] == "reference_flux_hz") {
    cfg.report_reference_flux_hz = parse_double(key, value);
    return;
  }
  if (head == "output" && parts.size() == 2 && parts[1] == "dir") {
    cfg.output_dir = value;
    return;
  }
  throw ConfigError("unknown config key: " + key);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  for (std::size_t i = 0; i < n_elements; ++i) cfg.elements[i].index = int(i);
  for (std::size_t i = 0; i < n_elements; ++i)
    for (std::size_t j = 0; j < n_elements; ++j)
      if (i != j) cfg.xtalk_delay[i][j] = 1.0;

  std::size_t line_no = 0;
  bool saw_per_element_anchor = false;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (key == "bias.dark_target_hz") saw_per_element_anchor = true;
    assign(cfg, key, value);
  }

  // The two dark-count anchors answer the same question differently, so a
  // config must commit to one.
  if (saw_per_element_anchor && cfg.net_dark_target_hz)
    throw ConfigError("bias.dark_target_hz and bias.net_dark_target_hz are mutually exclusive");
  validate(cfg.source);
  if (cfg.duration_ps <= 0) throw ConfigError("sim.duration_ps must be positive");
  if (!(cfg.instrument_jitter_fwhm_ps >= 0.0))
    throw ConfigError("sim.instrument_jitter_fwhm_ps must be nonnegative");
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot read config file: ") + e.what());
  }
  return parse_config_text(text);
}

namespace {

void render_matrix(std::string& out, const std::string& prefix, const Matrix16& m) {
  // Most frequent off-diagonal value becomes the .all line; only the
  // exceptions get pair lines. Ties resolve to the smaller value so the
  // echo is canonical.
  std::map<double, int> freq;
  for (std::size_t i = 0; i < n_elements; ++i)
    for (std::size_t j = 0; j < n_elements; ++j)
      if (i != j) ++freq[m[i][j]];
  double mode = 0.0;
  int best = -1;
  for (const auto& [value, count] : freq)
    if (count > best) {
      best = count;
      mode = value;
    }
  out += prefix + ".all = " + fmt_double(mode) + "\n";
  for (std::size_t i = 0; i < n_elements; ++i)
    for (std::size_t j = 0; j < n_elements; ++j)
      if (i != j && m[i][j] != mode)
        out += prefix + "." + std::to_string(i) + "." + std::to_string(j) + " = " +
               fmt_double(m[i][j]) + "\n";
}

}  // namespace

std::string render_config(const ExperimentConfig& cfg) {
  std::string out;
  out.reserve(8192);
  out += "# effective configuration (canonical echo; output.dir omitted)\n";
  for (std::size_t i = 0; i < n_elements; ++i) {
    const ElementModel& e = cfg.elements[i];
    std::string p = "element." + std::to_string(i) + ".";
    out += p + "i_switch_ua = " + fmt_double(e.response.i_switch) + "\n";
    out += p + "i_mid_ua = " + fmt_double(e.response.i_mid) + "\n";
    out += p + "i_width_ua = " + fmt_double(e.response.i_width) + "\n";
    out += p + "eps_max = " + fmt_double(e.response.eps_max) + "\n";
    out += p + "d_switch_hz = " + fmt_double(e.response.d_switch) + "\n";
    out += p + "d_decade_ua = " + fmt_double(e.response.d_decade) + "\n";
    out += p + "dead_time_ns = " + fmt_double(e.dead_time) + "\n";
    out += p + "jitter_fwhm_ps = " + fmt_double(e.jitter_fwhm) + "\n";
    out += p + "coupling = " + fmt_double(e.coupling) + "\n";
  }
  render_matrix(out, "crosstalk.high", cfg.xtalk_high);
  render_matrix(out, "crosstalk.low", cfg.xtalk_low);
  render_matrix(out, "crosstalk.delay_ns", cfg.xtalk_delay);
  if (cfg.net_dark_target_hz)
    out += "bias.net_dark_target_hz = " + fmt_double(*cfg.net_dark_target_hz) + "\n";
  else
    out += "bias.dark_target_hz = " + fmt_double(cfg.dark_target_hz) + "\n";
  for (std::size_t i = 0; i < n_elements; ++i)
    if (cfg.bias_override[i])
      out += "bias." + std::to_string(i) + ".current_ua = " + fmt_double(*cfg.bias_override[i]) +
             "\n";
  if (std::holds_alternative<CwSource>(cfg.source.kind)) {
    out += "source.kind = cw\n";
    out += "source.rate_hz = " + fmt_double(std::get<CwSource>(cfg.source.kind).rate_hz) + "\n";
  } else {
    const PulsedSource& p = std::get<PulsedSource>(cfg.source.kind);
    out += "source.kind = pulsed\n";
    out += "source.rep_rate_hz = " + fmt_double(p.rep_rate_hz) + "\n";
    out += "source.pulse_fwhm_ps = " + fmt_double(p.pulse_fwhm_ps) + "\n";
    out += "source.mean_photons_per_pulse = " + fmt_double(p.mean_photons_per_pulse) + "\n";
  }
  out += "source.attenuation_db = " + fmt_double(cfg.source.attenuation_db) + "\n";
  out += "sim.duration_ps = " + std::to_string(cfg.duration_ps) + "\n";
  out += "sim.seed = " + std::to_string(cfg.seed) + "\n";
  out += "sim.instrument_jitter_fwhm_ps = " + fmt_double(cfg.instrument_jitter_fwhm_ps) + "\n";
  out += std::string("sim.xtalk_regime = ") +
         (cfg.sim_regime == CrosstalkRegime::high_bias ? "high" : "low") + "\n";
  out += "sweep.db_list = ";
  for (std::size_t k = 0; k < cfg.sweep_db.size(); ++k)
    out += (k ? "," : "") + fmt_double(cfg.sweep_db[k]);
  out += "\n";
  out += "sweep.base_rate_hz = " + fmt_double(cfg.sweep_base_rate_hz) + "\n";
  out += "sweep.target_counts = " + fmt_double(cfg.sweep_target_counts) + "\n";
  out += "sweep.max_point_duration_ps = " + std::to_string(cfg.sweep_max_point_duration_ps) + "\n";
  out += "jitter.rep_rate_hz = " + fmt_double(cfg.jitter_rep_rate_hz) + "\n";
  out += "jitter.mean_photons_per_pulse = " + fmt_double(cfg.jitter_mu) + "\n";
  out += "jitter.pulse_fwhm_ps = " + fmt_double(cfg.jitter_pulse_fwhm_ps) + "\n";
  out += "jitter.duration_ps = " + std::to_string(cfg.jitter_duration_ps) + "\n";
  out += "jitter.bin_ps = " + fmt_double(cfg.jitter_bin_ps) + "\n";
  out += "xtalk.high.base_dark_hz = " + fmt_double(cfg.xt_high_base_hz) + "\n";
  out += "xtalk.high.aggressor_dark_hz = " + fmt_double(cfg.xt_high_aggressor_hz) + "\n";
  out += "xtalk.high.duration_ps = " + std::to_string(cfg.xt_high_duration_ps) + "\n";
  out += "xtalk.low.base_dark_hz = " + fmt_double(cfg.xt_low_base_hz) + "\n";
  out += "xtalk.low.aggressor_dark_hz = " + fmt_double(cfg.xt_low_aggressor_hz) + "\n";
  out += "xtalk.low.duration_ps = " + std::to_string(cfg.xt_low_duration_ps) + "\n";
  out += "xtalk.delay_pair = " + std::to_string(cfg.xt_delay_pair[0]) + "," +
         std::to_string(cfg.xt_delay_pair[1]) + "\n";
  out += "xtalk.delay_bin_ps = " + std::to_string(cfg.xt_delay_bin_ps) + "\n";
  out += "sde.flux_list_hz = ";
  for (std::size_t k = 0; k < cfg.sde_flux_hz.size(); ++k)
    out += (k ? "," : "") + fmt_double(cfg.sde_flux_hz[k]);
  out += "\n";
  out += "sde.target_photons = " + fmt_double(cfg.sde_target_photons) + "\n";
  out += "sde.max_duration_ps = " + std::to_string(cfg.sde_max_duration_ps) + "\n";
  out += "report.reference_flux_hz = " + fmt_double(cfg.report_reference_flux_hz) + "\n";
  return out;
}

ArrayModel array_for(const ExperimentConfig& cfg, CrosstalkRegime regime) {
  ArrayModel array;
  array.elements = cfg.elements;
  array.crosstalk_prob = regime == CrosstalkRegime::high_bias ? cfg.xtalk_high : cfg.xtalk_low;
  array.crosstalk_delay = cfg.xtalk_delay;
  validate(array);
  return array;
}

OperatingPoint operating_point_for(const ExperimentConfig& cfg, const ArrayModel& array) {
  if (cfg.net_dark_target_hz && *cfg.net_dark_target_hz <= 0.0)
    throw ConfigError("bias.net_dark_target_hz must be positive");
  double per_element =
      cfg.net_dark_target_hz ? *cfg.net_dark_target_hz / double(n_elements) : cfg.dark_target_hz;
  OperatingPoint op;
  try {
    op = operating_point_for_dark_rate(array, per_element);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bias anchor: ") + e.what());
  }
  for (std::size_t i = 0; i < n_elements; ++i)
    if (cfg.bias_override[i]) op.bias[i] = *cfg.bias_override[i];
  try {
    validate(array, op);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return op;
}

}  // namespace snspd
