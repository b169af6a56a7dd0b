// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace snspd::cli {

// Command-line overrides. --duration retargets the duration knob each
// command actually uses (sim, jitter, crosstalk, or the per-point caps);
// the mapping is documented per command in the README.
struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> duration_ps;
  std::optional<std::string> out_dir;
  bool measured = false;       // simulate: strip truth labels from the tag file
  std::string regime = "both"; // crosstalk: high, low, or both
};

// Exit codes: 0 success, 1 config error, 2 runtime/estimator failure.
int cmd_simulate(const CliOptions& options);
int cmd_sweep(const CliOptions& options);
int cmd_fit_reset(const CliOptions& options);
int cmd_jitter(const CliOptions& options);
int cmd_crosstalk(const CliOptions& options);
int cmd_sde_curve(const CliOptions& options);
int cmd_report(const CliOptions& options);

}  // namespace snspd::cli
