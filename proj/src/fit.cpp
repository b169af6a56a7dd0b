// SPDX-License-Identifier: Apache-2.0
#include "snspd/fit.hpp"

#include <algorithm>
#include <cmath>

namespace snspd {

namespace {

double squared_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// In-place Gaussian elimination with partial pivoting; n is small (3 here).
bool solve_dense(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
    if (a[pivot * n + col] == 0.0) return false;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    double inv = 1.0 / a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = a[r * n + col] * inv;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t col = n; col-- > 0;) {
    double s = b[col];
    for (std::size_t c = col + 1; c < n; ++c) s -= a[col * n + c] * b[c];
    b[col] = s / a[col * n + col];
  }
  return true;
}

}  // namespace

FitResult fit_least_squares(const ResidualFn& residuals, std::vector<double> p0,
                            const std::vector<double>& lower, const std::vector<double>& upper,
                            const FitOptions& options) {
  const std::size_t n = p0.size();
  if (lower.size() != n || upper.size() != n)
    throw std::invalid_argument("fit: bound sizes must match the parameter count");
  std::vector<double> typical(n, 1.0);
  for (std::size_t j = 0; j < n && j < options.typical.size(); ++j)
    if (options.typical[j] > 0.0) typical[j] = options.typical[j];

  auto clamp = [&](std::vector<double>& p) {
    for (std::size_t j = 0; j < n; ++j) p[j] = std::clamp(p[j], lower[j], upper[j]);
  };
  clamp(p0);

  std::vector<double> r;
  residuals(p0, r);
  const std::size_t m = r.size();
  if (m < n) throw std::invalid_argument("fit: fewer residuals than parameters");
  double cost = squared_norm(r);

  std::vector<double> jac(m * n), r_step(m), r_trial(m), p_trial(n), delta(n);
  std::vector<double> jtj(n * n), rhs(n), lhs(n * n);
  const double sqrt_eps = std::sqrt(2.220446049250313e-16);
  double lambda = 1e-3;

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (cost == 0.0) return {std::move(p0), cost, iter};

    // Forward-difference Jacobian, one bounded step per parameter.
    for (std::size_t j = 0; j < n; ++j) {
      double h = sqrt_eps * std::max(std::fabs(p0[j]), typical[j]);
      if (p0[j] + h > upper[j]) h = -h;  // step inward at the upper bound
      p_trial = p0;
      p_trial[j] = std::clamp(p0[j] + h, lower[j], upper[j]);
      double actual = p_trial[j] - p0[j];
      if (actual == 0.0) {
        for (std::size_t k = 0; k < m; ++k) jac[k * n + j] = 0.0;
        continue;
      }
      residuals(p_trial, r_step);
      double inv = 1.0 / actual;
      for (std::size_t k = 0; k < m; ++k) jac[k * n + j] = (r_step[k] - r[k]) * inv;
    }

    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a; b < n; ++b) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += jac[k * n + a] * jac[k * n + b];
        jtj[a * n + b] = s;
        jtj[b * n + a] = s;
      }
      double g = 0.0;
      for (std::size_t k = 0; k < m; ++k) g += jac[k * n + a] * r[k];
      rhs[a] = -g;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      lhs = jtj;
      std::vector<double> b = rhs;
      for (std::size_t j = 0; j < n; ++j) {
        double d = jtj[j * n + j];
        lhs[j * n + j] = d + lambda * (d > 0.0 ? d : 1.0);  // Marquardt scaling
      }
      if (!solve_dense(lhs, b, n)) {
        lambda *= 10.0;
        continue;
      }
      delta = b;
      p_trial = p0;
      for (std::size_t j = 0; j < n; ++j) p_trial[j] += delta[j];
      clamp(p_trial);
      residuals(p_trial, r_trial);
      double trial_cost = squared_norm(r_trial);
      if (trial_cost < cost) {
        double step_rel = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          step_rel = std::max(step_rel,
                              std::fabs(p_trial[j] - p0[j]) /
                                  std::max(std::fabs(p_trial[j]), typical[j]));
        double decrease = (cost - trial_cost) / cost;
        p0 = p_trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (decrease < options.ftol || step_rel < options.xtol)
          return {std::move(p0), cost, iter + 1};
      } else {
        lambda *= 7.0;
        if (lambda > 1e14) {
          // No descent direction at numerical resolution: a stationary point.
          return {std::move(p0), cost, iter + 1};
        }
      }
    }
    if (!accepted) return {std::move(p0), cost, iter + 1};
  }
  throw FitError("fit did not converge within the iteration budget",
                 {std::move(p0), cost, iter});
}

}  // namespace snspd
