// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <functional>
#include <string>

#include <CLI11.hpp>

#include "snspd/cli.hpp"

namespace {

void add_common(CLI::App* cmd, snspd::cli::CliOptions& options, std::uint64_t& seed,
                std::int64_t& duration, std::string& out_dir) {
  cmd->add_option("-c,--config", options.config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", seed, "override sim.seed");
  cmd->add_option("-d,--duration", duration, "override the command's duration knob, in ps");
  cmd->add_option("-o,--out", out_dir, "override output.dir");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SNSPD array simulator and estimation toolkit"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd = nullptr;
    snspd::cli::CliOptions options;
    std::uint64_t seed = 0;
    std::int64_t duration = 0;
    std::string out_dir;
    std::function<int(const snspd::cli::CliOptions&)> run;
  };
  Sub subs[7];
  const char* names[7] = {"simulate", "sweep", "fit-reset", "jitter",
                          "crosstalk", "sde-curve", "report"};
  const char* briefs[7] = {
      "run one simulation and write time tags",
      "run an attenuation sweep and write per-channel count rates",
      "run the sweep and fit per-channel reset times",
      "run the pulsed jitter experiment and deconvolve the instrument",
      "estimate the pairwise crosstalk matrix",
      "measure detection efficiency against photon flux",
      "summarize the estimator outputs in one report"};
  int (*runners[7])(const snspd::cli::CliOptions&) = {
      snspd::cli::cmd_simulate,  snspd::cli::cmd_sweep,     snspd::cli::cmd_fit_reset,
      snspd::cli::cmd_jitter,    snspd::cli::cmd_crosstalk, snspd::cli::cmd_sde_curve,
      snspd::cli::cmd_report};

  for (int i = 0; i < 7; ++i) {
    Sub& sub = subs[i];
    sub.cmd = app.add_subcommand(names[i], briefs[i]);
    add_common(sub.cmd, sub.options, sub.seed, sub.duration, sub.out_dir);
    sub.run = runners[i];
  }
  subs[0].cmd->add_flag("--measured", subs[0].options.measured,
                        "write the measured view (no origin column)");
  subs[4].cmd->add_option("--regime", subs[4].options.regime,
                          "crosstalk regime: high, low, or both");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (Sub& sub : subs) {
    if (!sub.cmd->parsed()) continue;
    if (sub.cmd->count("--seed") > 0) sub.options.seed = sub.seed;
    if (sub.cmd->count("--duration") > 0) sub.options.duration_ps = sub.duration;
    if (sub.cmd->count("--out") > 0) sub.options.out_dir = sub.out_dir;
    return sub.run(sub.options);
  }
  return 1;
}
