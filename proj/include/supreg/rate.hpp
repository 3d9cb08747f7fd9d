#pragma once

// The spatially dependent rate: L h^s = sigma * sqrt(log n / (n mu([x-h, x+h]))).

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "supreg/design.hpp"
#include "supreg/error.hpp"
#include "supreg/holder.hpp"
#include "supreg/parallel.hpp"

namespace supreg {

inline constexpr double kRateBracketLow = 1e-15;
inline constexpr double kRateRelativeTolerance = 1e-12;

struct RateProblem {
  const DesignDensity* density = nullptr;
  HolderSpec spec;
  double sigma = 1.0;
  double n = 0.0;

  // log of L h^s sqrt(n mu) minus log of sigma sqrt(log n); increasing in h.
  double log_gap(double x, double h) const {
    const double mass = density->interval_mass(symmetric_window(x, h));
    if (!(mass > 0.0)) return -HUGE_VAL;
    return std::log(spec.L) + spec.s * std::log(h) + 0.5 * std::log(n * mass) -
           std::log(sigma) - 0.5 * std::log(std::log(n));
  }
};

inline void validate_rate_inputs(const HolderSpec& spec, double sigma, double n) {
  spec.validate();
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("rate: sigma must be > 0");
  if (!(n >= 3.0) || !std::isfinite(n)) throw InputError("rate: n must be >= 3");
}

/// Root of h -> L h^s sqrt(n mu([x-h, x+h])) = sigma sqrt(log n) on (0, 1].
inline double solve_h(const DesignDensity& density, const HolderSpec& spec, double sigma, double n,
                      double x) {
  validate_rate_inputs(spec, sigma, n);
  if (!(x >= 0.0 && x <= 1.0)) throw InputError("rate: query point outside [0, 1]");
  const RateProblem problem{&density, spec, sigma, n};
  if (problem.log_gap(x, 1.0) < 0.0) {
    std::ostringstream msg;
    msg << "rate equation has no root in (0, 1] at x=" << x << " (n=" << n << ", sigma=" << sigma
        << "): n too small";
    throw NoRootError(msg.str(), x);
  }
  double lo = kRateBracketLow;
  double hi = 1.0;
  if (problem.log_gap(x, lo) >= 0.0) return lo;
  // Bisection in log h: the bracket spans many decades, and the relative
  // tolerance is what matters for r = L h^s.
  while (hi / lo - 1.0 > kRateRelativeTolerance) {
    const double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    if (problem.log_gap(x, mid) < 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Relative residual |L h^s - sigma sqrt(log n / (n mu))| / (L h^s).
inline double rate_residual(const DesignDensity& density, const HolderSpec& spec, double sigma,
                            double n, double x, double h) {
  const double lhs = spec.L * std::pow(h, spec.s);
  const double mass = density.interval_mass(symmetric_window(x, h));
  const double rhs = sigma * std::sqrt(std::log(n) / (n * mass));
  return std::abs(lhs - rhs) / lhs;
}

/// alpha = log r / log(log n / n).
inline double rate_exponent(double rate, double n) {
  return std::log(rate) / std::log(std::log(n) / n);
}

struct RateCurve {
  std::vector<double> x;
  std::vector<double> h;
  std::vector<double> rate;
  std::vector<double> alpha;
  double n = 0.0;
  double sigma = 0.0;
  HolderSpec spec;

  std::size_t size() const noexcept { return x.size(); }

  /// Linear interpolation of r_n on the curve's grid (grid must be sorted).
  double rate_at(double q) const {
    if (x.empty()) throw InputError("rate curve is empty");
    if (q <= x.front()) return rate.front();
    if (q >= x.back()) return rate.back();
    const auto it = std::upper_bound(x.begin(), x.end(), q);
    const auto j = static_cast<std::size_t>(it - x.begin());
    const double t = (q - x[j - 1]) / (x[j] - x[j - 1]);
    return rate[j - 1] + t * (rate[j] - rate[j - 1]);
  }
};

inline RateCurve rate_curve(const DesignDensity& density, const HolderSpec& spec, double sigma,
                            double n, const std::vector<double>& grid, unsigned jobs = 1) {
  validate_rate_inputs(spec, sigma, n);
  RateCurve curve;
  curve.x = grid;
  curve.n = n;
  curve.sigma = sigma;
  curve.spec = spec;
  curve.h.assign(grid.size(), 0.0);
  curve.rate.assign(grid.size(), 0.0);
  curve.alpha.assign(grid.size(), 0.0);
  parallel_for(grid.size(), jobs, [&](std::size_t j) {
    curve.h[j] = solve_h(density, spec, sigma, n, grid[j]);
    curve.rate[j] = spec.L * std::pow(curve.h[j], spec.s);
    curve.alpha[j] = rate_exponent(curve.rate[j], n);
  });
  return curve;
}

inline std::vector<double> uniform_grid(std::size_t points) {
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = 0.5;
    return grid;
  }
  for (std::size_t j = 0; j < points; ++j)
    grid[j] = static_cast<double>(j) / static_cast<double>(points - 1);
  return grid;
}

/// Interior half-width for the uniform design: h^(2s+1) = sigma^2 log n / (2 n L^2).
inline double uniform_interior_h(const HolderSpec& spec, double sigma, double n) {
  return std::pow(sigma * sigma * std::log(n) / (2.0 * n * spec.L * spec.L), 1.0 / (2.0 * spec.s + 1.0));
}

/// Three-branch exponent formula for s = 1, sigma = L = 1, mu(x) = 4|x - 1/2|.
inline double cusp_alpha_closed_form(double n, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw InputError("cusp alpha: x outside [0, 1]");
  if (!(n >= 3.0)) throw InputError("cusp alpha: n must be >= 3");
  const double t = std::log(n) / n;
  const double lt = std::log(t);
  const double w = std::pow(std::log(n) / (2.0 * n), 0.25);
  if (x <= 0.5 - w) return (1.0 - std::log(1.0 - 2.0 * x) / lt) / 3.0;
  if (x >= 0.5 + w) return (1.0 - std::log(2.0 * x - 1.0) / lt) / 3.0;
  const double d2 = (x - 0.5) * (x - 0.5);
  return (std::log(std::sqrt(d2 * d2 + 4.0 * t) - d2) - std::log(2.0)) / (2.0 * lt);
}

/// Boundaries 1/2 -+ (log n / (2n))^(1/4) of the middle branch.
inline std::pair<double, double> cusp_branch_points(double n) {
  const double w = std::pow(std::log(n) / (2.0 * n), 0.25);
  return {0.5 - w, 0.5 + w};
}

}  // namespace supreg
