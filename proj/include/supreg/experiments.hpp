#pragma once

// Monte Carlo harnesses: sup-norm risk of the adaptive estimator, the localized
// piecewise-Taylor estimator, and the bump-family two-point testing problem.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "supreg/design.hpp"
#include "supreg/error.hpp"
#include "supreg/holder.hpp"
#include "supreg/lpe.hpp"
#include "supreg/parallel.hpp"
#include "supreg/rate.hpp"
#include "supreg/reconstruct.hpp"
#include "supreg/rng.hpp"
#include "supreg/stats.hpp"

namespace supreg {

struct NamedDensity {
  std::string name;
  DesignDensity density;
};

// ---------------------------------------------------------------------------
// Upper bound

struct UpperBoundConfig {
  std::vector<NamedDensity> densities;
  HolderSpec spec;
  TestFunctionKind function = TestFunctionKind::sine;
  double sigma = 0.25;
  std::vector<std::size_t> n_list;
  int reps = 50;
  std::uint64_t seed = 1;
  FitOptions fit;
  std::vector<double> points;  // designated x for pointwise errors
  std::size_t error_grid_points = 1025;
  std::size_t rate_grid_points = 1025;
  unsigned jobs = 1;

  void validate() const {
    spec.validate();
    fit.params.validate();
    fit.grid.validate();
    if (densities.empty()) throw InputError("upper-bound study needs at least one density");
    if (n_list.size() < 2) throw InputError("upper-bound study needs at least two sample sizes");
    for (std::size_t i = 1; i < n_list.size(); ++i)
      if (!(n_list[i] > n_list[i - 1])) throw InputError("n_list must be increasing");
    if (reps < 1) throw InputError("reps must be >= 1");
    if (!(sigma >= 0.0)) throw InputError("sigma must be >= 0");
    if (static_cast<double>(fit.params.R) + 1.0 < spec.s) throw InputError("need s <= R + 1");
    for (double x : points)
      if (!(x >= 0.0 && x <= 1.0)) throw InputError("designated points must lie in [0, 1]");
  }
};

struct ReplicationResult {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double raw_sup = std::nan("");
  double normalized_sup = std::nan("");
  std::vector<double> pointwise;
};

struct RiskCell {
  std::size_t n = 0;
  std::vector<ReplicationResult> reps;
  std::size_t failures = 0;
  double median_raw = 0.0;
  double q90_raw = 0.0;
  double median_normalized = 0.0;
  double q90_normalized = 0.0;
  std::vector<double> median_pointwise;
  std::vector<double> rate_at_points;
};

struct DensityRisk {
  std::string name;
  std::vector<RiskCell> cells;
  stats::LineFit sup_slope;                    // log median raw sup vs log(log n / n)
  std::vector<stats::LineFit> pointwise_slopes;  // one per designated point
};

struct RiskReport {
  UpperBoundConfig config;
  std::vector<DensityRisk> densities;
  std::size_t failures = 0;
};

inline std::vector<double> column(const RiskCell& cell, std::size_t metric, std::size_t point = 0) {
  std::vector<double> out;
  out.reserve(cell.reps.size());
  for (const auto& r : cell.reps) {
    if (!r.ok) continue;
    if (metric == 0) out.push_back(r.raw_sup);
    else if (metric == 1) out.push_back(r.normalized_sup);
    else out.push_back(r.pointwise[point]);
  }
  return out;
}

inline void summarize(RiskCell& cell, std::size_t points) {
  cell.failures = 0;
  for (const auto& r : cell.reps) cell.failures += r.ok ? 0 : 1;
  const auto raw = column(cell, 0);
  const auto normalized = column(cell, 1);
  cell.median_raw = stats::median(raw);
  cell.q90_raw = stats::quantile(raw, 0.9);
  cell.median_normalized = stats::median(normalized);
  cell.q90_normalized = stats::quantile(normalized, 0.9);
  cell.median_pointwise.assign(points, 0.0);
  for (std::size_t j = 0; j < points; ++j) cell.median_pointwise[j] = stats::median(column(cell, 2, j));
}

/// OLS slope of log(values) against log(log n / n).
inline stats::LineFit log_rate_slope(const std::vector<std::size_t>& ns, const std::vector<double>& values) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(values[i] > 0.0)) continue;
    const double n = static_cast<double>(ns[i]);
    x.push_back(std::log(std::log(n) / n));
    y.push_back(std::log(values[i]));
  }
  if (x.size() < 2) return {};
  return stats::ols(x, y);
}

inline std::uint64_t replication_seed(std::uint64_t seed, std::size_t density, std::size_t n_index,
                                      std::size_t rep) {
  return derive_seed(seed, {static_cast<std::uint64_t>(Stream::replication), density, n_index, rep});
}

inline RiskReport run_upper_bound_study(const UpperBoundConfig& config) {
  config.validate();
  RiskReport report;
  report.config = config;
  const TestFunction f = make_holder_test_function(config.spec, config.function);
  const std::vector<double> rate_grid = uniform_grid(config.rate_grid_points);
  for (std::size_t d = 0; d < config.densities.size(); ++d) {
    const DesignDensity& density = config.densities[d].density;
    DensityRisk risk;
    risk.name = config.densities[d].name;
    for (std::size_t ni = 0; ni < config.n_list.size(); ++ni) {
      const std::size_t n = config.n_list[ni];
      const RateCurve rates = rate_curve(density, config.spec, std::max(config.sigma, 1e-300),
                                         static_cast<double>(n), rate_grid, config.jobs);
      RiskCell cell;
      cell.n = n;
      cell.reps.resize(static_cast<std::size_t>(config.reps));
      for (double x : config.points) cell.rate_at_points.push_back(rates.rate_at(x));
      FitOptions fit = config.fit;
      fit.jobs = 1;
      parallel_for(cell.reps.size(), config.jobs, [&](std::size_t rep) {
        ReplicationResult& out = cell.reps[rep];
        out.seed = replication_seed(config.seed, d, ni, rep);
        try {
          const Sample sample = sample_model(density, f, config.sigma, n, out.seed);
          const EstimatorModel model = fit_all_knots(sample, fit);
          const SupError err = sup_norm_error(model, f, rates, config.error_grid_points);
          out.raw_sup = err.raw_sup;
          out.normalized_sup = err.normalized_sup;
          for (double x : config.points) out.pointwise.push_back(std::abs(predict(model, x) - f(x)));
        } catch (const Error& e) {
          out.ok = false;
          out.error = e.what();
          out.pointwise.assign(config.points.size(), std::nan(""));
        }
      });
      summarize(cell, config.points.size());
      report.failures += cell.failures;
      risk.cells.push_back(std::move(cell));
    }
    std::vector<double> med;
    for (const auto& c : risk.cells) med.push_back(c.median_raw);
    risk.sup_slope = log_rate_slope(config.n_list, med);
    for (std::size_t j = 0; j < config.points.size(); ++j) {
      std::vector<double> mp;
      for (const auto& c : risk.cells) mp.push_back(c.median_pointwise[j]);
      risk.pointwise_slopes.push_back(log_rate_slope(config.n_list, mp));
    }
    report.densities.push_back(std::move(risk));
  }
  return report;
}

/// Fraction of bootstrap resamples (replications resampled within each n) in
/// which the pointwise slope at point a is smaller than the slope at point b.
inline double bootstrap_slope_order(const DensityRisk& risk, const std::vector<std::size_t>& ns,
                                    std::size_t a, std::size_t b, std::size_t resamples,
                                    std::uint64_t seed) {
  Engine engine = make_engine(derive_seed(seed, Stream::bootstrap));
  std::size_t wins = 0;
  std::vector<std::vector<double>> col_a, col_b;
  for (const auto& cell : risk.cells) {
    col_a.push_back(column(cell, 2, a));
    col_b.push_back(column(cell, 2, b));
  }
  for (std::size_t r = 0; r < resamples; ++r) {
    std::vector<double> ma, mb;
    for (std::size_t c = 0; c < col_a.size(); ++c) {
      const std::size_t m = col_a[c].size();
      if (m == 0) return std::nan("");
      std::uniform_int_distribution<std::size_t> pick(0, m - 1);
      std::vector<double> ra(m), rb(m);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t k = pick(engine);
        ra[i] = col_a[c][k];
        rb[i] = col_b[c][k];
      }
      ma.push_back(stats::median(ra));
      mb.push_back(stats::median(rb));
    }
    if (log_rate_slope(ns, ma).slope < log_rate_slope(ns, mb).slope) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(resamples);
}

// ---------------------------------------------------------------------------
// Localized estimator

enum class LocalizedCase { positive_density, vanishing_point };

inline std::function<double(double)> default_ell() {
  return [](double n) { return std::log(n) * std::log(n); };
}

struct LocalizedConfig {
  LocalizedCase kind = LocalizedCase::positive_density;
  NamedDensity density{"uniform", DesignDensity::uniform()};
  double x0 = 0.5;  // interval center, or the vanishing point
  HolderSpec spec;
  TestFunctionKind function = TestFunctionKind::sine;
  double sigma = 0.25;
  std::vector<std::size_t> n_list;
  int reps = 50;
  std::uint64_t seed = 1;
  int R = -1;  // -1: the largest integer below s
  std::function<double(double)> ell = default_ell();
  std::string ell_name = "log(n)^2";
  std::size_t eval_points = 201;
  unsigned jobs = 1;

  int degree() const { return R < 0 ? spec.r() : R; }

  void validate() const {
    spec.validate();
    validate_degree(degree());
    if (degree() < spec.r()) throw InputError("localized study: R must be >= the integer part below s");
    if (n_list.empty()) throw InputError("localized study needs sample sizes");
    if (reps < 1) throw InputError("reps must be >= 1");
    if (!(x0 >= 0.0 && x0 <= 1.0)) throw InputError("x0 must lie in [0, 1]");
    if (!(sigma >= 0.0)) throw InputError("sigma must be >= 0");
    if (kind == LocalizedCase::vanishing_point && density.density.max_beta() <= 0.0)
      throw InputError("vanishing-point case needs a density that vanishes");
  }

  double beta() const {
    for (const auto& v : density.density.vanishing_points())
      if (std::abs(v.x0 - x0) < 1e-12) return v.beta;
    return 0.0;
  }
};

struct LocalizedLayout {
  Interval interval;
  bool clipped = false;
  double ell = 0.0;
  std::vector<double> knots;       // increasing
  std::vector<double> bandwidths;  // h_k
};

namespace detail {

// Solves t - from = step(t) (rightward) or from - t = step(t) (leftward) by
// bisection; step(t) = n^(-alpha_n(t) / s) shrinks away from the vanishing point.
template <class Step>
double implicit_step(double from, int direction, Step&& step) {
  const double first = step(from);
  double lo = 0.0, hi = first;  // distance from `from`
  const auto gap = [&](double d) { return d - step(from + direction * d); };
  if (gap(hi) < 0.0) return from + direction * hi;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gap(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  return from + direction * hi;
}

}  // namespace detail

inline LocalizedLayout localized_layout(const LocalizedConfig& config, std::size_t n_count) {
  const double n = static_cast<double>(n_count);
  const double s = config.spec.s;
  LocalizedLayout layout;
  layout.ell = config.ell(n);
  if (!(layout.ell > 1.0)) throw InputError("ell_n must exceed 1 (log ell_n > 0)");
  const double log_ell = std::log(layout.ell);
  const auto clip = [&](Interval I) {
    const Interval c = clip_unit(I);
    layout.clipped = !(c == I);
    return c;
  };
  if (config.kind == LocalizedCase::positive_density) {
    const double length = std::pow(layout.ell / n, 1.0 / (1.0 + 2.0 * s));
    layout.interval = clip({config.x0 - 0.5 * length, config.x0 + 0.5 * length});
    const double h = std::pow(log_ell / n, 1.0 / (2.0 * s + 1.0));
    const auto N = static_cast<std::size_t>(std::floor(layout.ell));
    for (std::size_t k = 0; k <= N; ++k) {
      const double x = layout.interval.lo + std::pow(static_cast<double>(k) / n, 1.0 / (2.0 * s + 1.0));
      if (x > 1.0) break;
      layout.knots.push_back(x);
      layout.bandwidths.push_back(h);
    }
    return layout;
  }
  const double beta = config.beta();
  const double half = std::pow(layout.ell / n, 1.0 / (1.0 + 2.0 * s + beta));
  layout.interval = clip({config.x0 - half, config.x0 + half});
  const double sigma = config.sigma > 0.0 ? config.sigma : 1.0;
  const auto alpha = [&](double x) {
    const double h = solve_h(config.density.density, config.spec, sigma, n, std::clamp(x, 0.0, 1.0));
    return rate_exponent(config.spec.L * std::pow(h, s), n);
  };
  const auto step = [&](double x) { return std::pow(n, -alpha(x) / s); };
  const auto N = static_cast<std::size_t>(std::floor(layout.ell));
  std::vector<double> left, right{config.x0};
  // Knots go outward until they leave I_n (or [0, 1]); at most N per side.
  for (std::size_t k = 0; k < N && right.back() < layout.interval.hi; ++k) {
    const double next = detail::implicit_step(right.back(), +1, step);
    right.push_back(std::min(next, 1.0));
    if (next >= 1.0) break;
  }
  double cur = config.x0;
  for (std::size_t k = 0; k < N && cur > layout.interval.lo; ++k) {
    const double next = detail::implicit_step(cur, -1, step);
    cur = std::max(next, 0.0);
    left.push_back(cur);
    if (next <= 0.0) break;
  }
  std::reverse(left.begin(), left.end());
  layout.knots = left;
  layout.knots.insert(layout.knots.end(), right.begin(), right.end());
  layout.knots.erase(std::unique(layout.knots.begin(), layout.knots.end()), layout.knots.end());
  for (double x : layout.knots)
    layout.bandwidths.push_back(std::pow(log_ell / n, alpha(x) / s));
  return layout;
}

/// Piecewise Taylor estimator: on [x_k, x_{k+1}) use the derivatives up to r of
/// the fixed-bandwidth fit at x_k.
struct LocalizedEstimator {
  std::vector<double> knots;
  std::vector<LocalFit> fits;
  int r = 0;

  double operator()(double x) const {
    auto it = std::upper_bound(knots.begin(), knots.end(), x);
    std::size_t k = it == knots.begin() ? 0 : static_cast<std::size_t>(it - knots.begin()) - 1;
    const double d = x - knots[k];
    double acc = 0.0, power = 1.0, fact = 1.0;
    for (int m = 0; m <= r; ++m) {
      if (m > 0) {
        power *= d;
        fact *= m;
      }
      acc += evaluate_derivative(fits[k], m, knots[k]) * power / fact;
    }
    return acc;
  }
};

inline LocalizedEstimator fit_localized(const Sample& sample, const LocalizedLayout& layout, int R, int r) {
  LocalizedEstimator est;
  est.knots = layout.knots;
  est.r = r;
  const EmpiricalMeasure em(sample);
  for (std::size_t k = 0; k < layout.knots.size(); ++k) {
    const double x = layout.knots[k];
    const Interval w = symmetric_window(x, layout.bandwidths[k]);
    est.fits.push_back(fit_local(build_gram(sample, em, x, w, R)));
  }
  return est;
}

inline std::vector<double> localized_eval_grid(const LocalizedLayout& layout, std::size_t points) {
  std::vector<double> grid;
  for (std::size_t j = 0; j < points; ++j) {
    const double t = points == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(points - 1);
    grid.push_back(layout.interval.lo + t * layout.interval.length());
  }
  for (double x : layout.knots)
    if (layout.interval.contains(x)) grid.push_back(x);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

/// Deterministic error ceiling for sigma = 0, s <= 1 and degree 0 when every
/// window holds at least two points: L h_k^s + L (x - x_k)^s on [x_k, x_{k+1}).
inline double localized_bias_ceiling(const LocalizedLayout& layout, const HolderSpec& spec, double x) {
  if (spec.s > 1.0) throw InputError("bias ceiling is only available for s <= 1");
  auto it = std::upper_bound(layout.knots.begin(), layout.knots.end(), x);
  std::size_t k = it == layout.knots.begin() ? 0 : static_cast<std::size_t>(it - layout.knots.begin()) - 1;
  return spec.L * (std::pow(layout.bandwidths[k], spec.s) + std::pow(std::abs(x - layout.knots[k]), spec.s));
}

struct LocalizedCell {
  std::size_t n = 0;
  LocalizedLayout layout;
  std::vector<double> risk;  // per replication: sup over I_n of |fhat - f| / r_n
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> errors;
  double median = 0.0;
  double q90 = 0.0;
};

struct LocalizedReport {
  LocalizedConfig config;
  std::vector<LocalizedCell> cells;
  bool any_clipped = false;
};

inline LocalizedReport run_localized_study(const LocalizedConfig& config) {
  config.validate();
  LocalizedReport report;
  report.config = config;
  const TestFunction f = make_holder_test_function(config.spec, config.function);
  const double rate_sigma = config.sigma > 0.0 ? config.sigma : 1.0;
  for (std::size_t ni = 0; ni < config.n_list.size(); ++ni) {
    const std::size_t n = config.n_list[ni];
    LocalizedCell cell;
    cell.n = n;
    cell.layout = localized_layout(config, n);
    report.any_clipped = report.any_clipped || cell.layout.clipped;
    const std::vector<double> grid = localized_eval_grid(cell.layout, config.eval_points);
    std::vector<double> rates(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j)
      rates[j] = config.spec.L *
                 std::pow(solve_h(config.density.density, config.spec, rate_sigma, static_cast<double>(n), grid[j]),
                          config.spec.s);
    cell.risk.assign(static_cast<std::size_t>(config.reps), std::nan(""));
    cell.seeds.assign(cell.risk.size(), 0);
    cell.errors.assign(cell.risk.size(), "");
    parallel_for(cell.risk.size(), config.jobs, [&](std::size_t rep) {
      cell.seeds[rep] = replication_seed(config.seed, 0, ni, rep);
      try {
        const Sample sample = sample_model(config.density.density, f, config.sigma, n, cell.seeds[rep]);
        const LocalizedEstimator est = fit_localized(sample, cell.layout, config.degree(), config.spec.r());
        double worst = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j)
          worst = std::max(worst, std::abs(est(grid[j]) - f(grid[j])) / rates[j]);
        cell.risk[rep] = worst;
      } catch (const Error& e) {
        cell.errors[rep] = e.what();
      }
    });
    cell.median = stats::median(cell.risk);
    cell.q90 = stats::quantile(cell.risk, 0.9);
    report.cells.push_back(std::move(cell));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Bump family and the two-point testing problem

inline constexpr std::size_t kBumpCertificationPoints = 4001;

struct BumpFamily {
  Interval interval;
  HolderSpec spec;
  double alpha = 0.0;
  double beta = 0.0;
  double a = 1.0;
  double phi_scale = 1.0;  // phi = phi_scale * exp(-1/(1 - t^2))
  double phi_sup = 0.0;
  double sup_h = 0.0;
  double Xi = 0.0;
  std::vector<double> centers;
  std::vector<double> h;
  SmoothBump bump{0};

  std::size_t size() const noexcept { return centers.size(); }
  double half_support(std::size_t k) const { return a * h[k]; }
  Interval support(std::size_t k) const { return symmetric_window(centers[k], half_support(k)); }

  double phi(double t) const { return phi_scale * bump(t); }

  /// f_k(x) = L (a h_k)^s phi((x - x_k) / (a h_k)).
  double f_k(std::size_t k, double x) const {
    const double w = half_support(k);
    return spec.L * std::pow(w, spec.s) * phi((x - centers[k]) / w);
  }

  double f_k_derivative(std::size_t k, double x) const {
    const double w = half_support(k);
    const int r = spec.r();
    return spec.L * std::pow(w, spec.s - r) * phi_scale * bump.derivative((x - centers[k]) / w, r);
  }

  double f(const std::vector<double>& theta, double x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < size(); ++k)
      if (support(k).contains(x)) acc += theta[k] * f_k(k, x);
    return acc;
  }

  TestFunction member(const std::vector<double>& theta) const {
    TestFunction out;
    out.name = "bump_family";
    out.order = spec.r();
    out.value = [this, theta](double x) { return f(theta, x); };
    out.derivative = [this, theta](double x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < size(); ++k)
        if (support(k).contains(x)) acc += theta[k] * f_k_derivative(k, x);
      return acc;
    };
    return out;
  }
};

/// Seminorm certification of the raw bump profile, so phi lands in H(s, 0.95).
inline double bump_scale_for(const HolderSpec& spec) {
  const SmoothBump bump(spec.r());
  const int r = spec.r();
  const double semi = grid_seminorm([&](double t) { return bump.derivative(t, r); }, spec.gamma(), -1.25,
                                    1.25, kBumpCertificationPoints);
  return kHolderMargin / semi;
}

inline Interval localization_interval(double center, double length) {
  return clip_unit({center - 0.5 * length, center + 0.5 * length});
}

inline BumpFamily build_bump_family(const DesignDensity& density, const HolderSpec& spec, double sigma,
                                    std::size_t n_count, const Interval& interval, double alpha) {
  spec.validate();
  require_valid(interval);
  const double n = static_cast<double>(n_count);
  BumpFamily fam;
  fam.interval = interval;
  fam.spec = spec;
  fam.alpha = alpha;
  fam.beta = density.max_beta();
  const double s = spec.s;
  if (!(alpha > 0.0 && alpha < 1.0 / (1.0 + 2.0 * s + fam.beta)))
    throw InputError("bump family: alpha must lie in (0, 1/(1 + 2s + beta))");
  fam.bump = SmoothBump(spec.r());
  fam.phi_scale = bump_scale_for(spec);
  fam.phi_sup = fam.phi_scale * std::exp(-1.0);
  fam.a = std::min(1.0, std::pow(2.0 / (fam.phi_sup * fam.phi_sup) * (1.0 / (1.0 + 2.0 * s + fam.beta) - alpha),
                                 1.0 / (2.0 * s)));
  std::vector<double> probe = uniform_grid(1001);
  for (const auto& v : density.vanishing_points()) probe.push_back(v.x0);
  for (double x : probe) fam.sup_h = std::max(fam.sup_h, solve_h(density, spec, sigma, n, x));
  fam.Xi = 2.0 * fam.a * (1.0 + std::pow(2.0, 1.0 / spec.gamma())) * fam.sup_h;
  const auto K = static_cast<std::size_t>(std::floor(interval.length() / fam.Xi));
  if (K == 0) throw EmptyFamilyError("localization interval too short for a single bump");
  for (std::size_t k = 1; k <= K; ++k) {
    const double x = interval.lo + static_cast<double>(k) * fam.Xi;
    fam.centers.push_back(x);
    fam.h.push_back(solve_h(density, spec, sigma, n, std::clamp(x, 0.0, 1.0)));
  }
  return fam;
}

struct LowerBoundConfig {
  NamedDensity density{"power_cusp", DesignDensity::power_cusp(0.5, 1.0)};
  HolderSpec spec;
  double sigma = 0.003;
  std::size_t n = 4096;
  double alpha = 0.125;
  double center = 0.5;
  int reps = 2000;
  std::uint64_t seed = 1;
  std::vector<double> thresholds = {0.5, -0.5, 0.25, -0.25};
  bool fixed_design = false;
  unsigned jobs = 1;

  Interval interval() const {
    return localization_interval(center, std::pow(static_cast<double>(n), -alpha));
  }
};

struct BumpStats {
  double center = 0.0;
  double h = 0.0;
  std::size_t errors = 0;        // sign rule misclassifications
  double expected_errors = 0.0;  // sum over reps of Phi(-1/v_k)
  double error_variance = 0.0;   // sum over reps of p (1 - p)
  double z_mean = 0.0;           // standardized (y_k - theta_k) / v_k
  double z_var = 0.0;
  std::size_t z_count = 0;
  std::size_t empty_reps = 0;    // reps without data under the bump
  double mean_v = 0.0;
  std::vector<std::size_t> alt_errors;  // per threshold rule
};

struct ThresholdRuleStats {
  double t = 0.0;
  std::size_t errors = 0;
  double diff_mean = 0.0;  // alt minus sign, per (rep, bump) trial
  double diff_se = 0.0;
};

struct BayesStats {
  LowerBoundConfig config;
  BumpFamily family;
  std::vector<BumpStats> bumps;
  std::vector<ThresholdRuleStats> rules;
  std::size_t sign_errors = 0;
  std::size_t trials = 0;
  double aggregate_bound = 0.0;  // mean over reps of (1 - min_k Phi(-1/v_k))^|K|
  double min_variance_mass = 0.0;  // mean over reps of |K| Phi(-1/min_k v_k)
  double corollary_ratio = 0.0;    // sup over I_n of v_n / r_n, v_n from the uniform design
};

/// y_k and v_k^2 = sigma^2 / sum f_k(X_i)^2 for one bump and one sample.
struct BumpStatistic {
  double y = 0.0;
  double v = std::numeric_limits<double>::infinity();
  bool empty = true;
};

inline BumpStatistic bump_statistic(const BumpFamily& fam, std::size_t k, const Sample& sample) {
  BumpStatistic out;
  const EmpiricalMeasure em(sample);
  const auto [first, last] = em.index_range(fam.support(k));
  double num = 0.0, den = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    const double fk = fam.f_k(k, sample.xs[i]);
    num += sample.ys[i] * fk;
    den += fk * fk;
  }
  if (den > 0.0) {
    out.empty = false;
    out.y = num / den;
    out.v = sample.sigma / std::sqrt(den);
  }
  return out;
}

inline double misclassification_probability(double v) {
  if (!std::isfinite(v)) return 0.5;
  if (v == 0.0) return 0.0;
  return stats::normal_cdf(-1.0 / v);
}

inline BayesStats run_lower_bound_study(const LowerBoundConfig& config) {
  config.spec.validate();
  if (!(config.sigma > 0.0)) throw InputError("lower-bound study needs sigma > 0");
  if (config.reps < 1) throw InputError("reps must be >= 1");
  BayesStats out;
  out.config = config;
  out.family = build_bump_family(config.density.density, config.spec, config.sigma, config.n,
                                 config.interval(), config.alpha);
  const BumpFamily& fam = out.family;
  const std::size_t K = fam.size();
  const std::size_t R = static_cast<std::size_t>(config.reps);
  const std::size_t T = config.thresholds.size();

  struct RepRecord {
    std::vector<double> y, v, theta;
  };
  std::vector<RepRecord> records(R);
  const Design shared = draw_design(config.density.density, config.n, config.seed);
  parallel_for(R, config.jobs, [&](std::size_t rep) {
    const std::uint64_t rs = replication_seed(config.seed, 0, 0, rep);
    Engine prior = make_engine(derive_seed(rs, Stream::prior));
    std::vector<double> theta(K);
    for (auto& t : theta) t = (prior() >> 63) ? 1.0 : -1.0;
    const TestFunction f = fam.member(theta);
    const Design design = config.fixed_design ? shared : draw_design(config.density.density, config.n, rs);
    const Sample sample = draw_responses(design, f.value, config.sigma, rs);
    RepRecord& rec = records[rep];
    rec.theta = theta;
    rec.y.resize(K);
    rec.v.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      const BumpStatistic st = bump_statistic(fam, k, sample);
      rec.y[k] = st.y;
      rec.v[k] = st.v;
    }
  });

  out.bumps.resize(K);
  out.rules.resize(T);
  for (std::size_t j = 0; j < T; ++j) out.rules[j].t = config.thresholds[j];
  std::vector<double> diff_sum(T, 0.0), diff_sq(T, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    out.bumps[k].center = fam.centers[k];
    out.bumps[k].h = fam.h[k];
    out.bumps[k].alt_errors.assign(T, 0);
  }
  double aggregate = 0.0, min_mass = 0.0;
  for (const RepRecord& rec : records) {
    double pmin = 0.5, vmin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      BumpStats& b = out.bumps[k];
      const double p = misclassification_probability(rec.v[k]);
      pmin = std::min(pmin, p);
      vmin = std::min(vmin, rec.v[k]);
      b.expected_errors += p;
      b.error_variance += p * (1.0 - p);
      const double guess = rec.y[k] >= 0.0 ? 1.0 : -1.0;
      const int sign_err = guess != rec.theta[k] ? 1 : 0;
      b.errors += static_cast<std::size_t>(sign_err);
      if (std::isfinite(rec.v[k])) {
        const double z = (rec.y[k] - rec.theta[k]) / rec.v[k];
        ++b.z_count;
        const double delta = z - b.z_mean;
        b.z_mean += delta / static_cast<double>(b.z_count);
        b.z_var += delta * (z - b.z_mean);
        b.mean_v += rec.v[k];
      } else {
        ++b.empty_reps;
      }
      for (std::size_t j = 0; j < T; ++j) {
        const double alt = rec.y[k] - config.thresholds[j] >= 0.0 ? 1.0 : -1.0;
        const int alt_err = alt != rec.theta[k] ? 1 : 0;
        b.alt_errors[j] += static_cast<std::size_t>(alt_err);
        const double d = alt_err - sign_err;
        diff_sum[j] += d;
        diff_sq[j] += d * d;
      }
    }
    aggregate += std::pow(1.0 - pmin, static_cast<double>(K));
    min_mass += static_cast<double>(K) * misclassification_probability(vmin);
  }
  for (auto& b : out.bumps) {
    out.sign_errors += b.errors;
    for (std::size_t j = 0; j < T; ++j) out.rules[j].errors += b.alt_errors[j];
    b.z_var = b.z_count > 1 ? b.z_var / static_cast<double>(b.z_count - 1) : std::nan("");
    b.mean_v = b.z_count > 0 ? b.mean_v / static_cast<double>(b.z_count) : std::nan("");
  }
  out.trials = K * R;
  for (std::size_t j = 0; j < T; ++j) {
    const double m = diff_sum[j] / static_cast<double>(out.trials);
    const double var = diff_sq[j] / static_cast<double>(out.trials) - m * m;
    out.rules[j].diff_mean = m;
    out.rules[j].diff_se = std::sqrt(std::max(0.0, var) / static_cast<double>(out.trials));
  }
  out.aggregate_bound = aggregate / static_cast<double>(R);
  out.min_variance_mass = min_mass / static_cast<double>(R);

  const DesignDensity uniform = DesignDensity::uniform();
  const Interval I = fam.interval;
  double ratio = 0.0;
  for (std::size_t j = 0; j <= 100; ++j) {
    const double x = I.lo + I.length() * static_cast<double>(j) / 100.0;
    const double v = solve_h(uniform, config.spec, config.sigma, static_cast<double>(config.n), x);
    const double r = solve_h(config.density.density, config.spec, config.sigma, static_cast<double>(config.n), x);
    ratio = std::max(ratio, std::pow(v / r, config.spec.s));
  }
  out.corollary_ratio = ratio;
  return out;
}

/// |K_n| Phi(-1/v) for the bump with the smallest population variance
/// v^2 = sigma^2 / (n int f_k^2 dmu).
inline double population_min_variance_mass(const BumpFamily& fam, const DesignDensity& density, double sigma,
                                           std::size_t n) {
  double vmin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < fam.size(); ++k) {
    const Interval sup = clip_unit(fam.support(k));
    const double energy = DesignDensity::integrate(
        [&](double x) {
          const double v = fam.f_k(k, x);
          return v * v * density(x);
        },
        sup.lo, sup.hi);
    if (energy > 0.0) vmin = std::min(vmin, sigma / std::sqrt(static_cast<double>(n) * energy));
  }
  return static_cast<double>(fam.size()) * misclassification_probability(vmin);
}

}  // namespace supreg
