// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace snspd {

struct FitOptions {
  int max_iterations = 200;
  double ftol = 1e-12;          // relative cost decrease considered converged
  double xtol = 1e-10;          // relative step size considered converged
  std::vector<double> typical;  // per-parameter scale for steps; defaults to 1
};

struct FitResult {
  std::vector<double> params;
  double cost = 0.0;  // sum of squared residuals
  int iterations = 0;
};

// Thrown when the iteration budget runs out; carries the best point found.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, FitResult best_point)
      : std::runtime_error(what), best(std::move(best_point)) {}
  FitResult best;
};

using ResidualFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;

// Levenberg-Marquardt least squares with box constraints. The Jacobian is
// forward-difference; steps are clamped into [lower, upper] before
// evaluation, so the residual function is never called out of bounds.
FitResult fit_least_squares(const ResidualFn& residuals, std::vector<double> p0,
                            const std::vector<double>& lower, const std::vector<double>& upper,
                            const FitOptions& options = {});

}  // namespace snspd
