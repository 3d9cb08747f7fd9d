#pragma once

// Design densities on [0, 1], sampling from the regression model
// Y = f(X) + sigma * xi, and the empirical sample measure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "supreg/error.hpp"
#include "supreg/interval.hpp"
#include "supreg/rng.hpp"

namespace supreg {

/// A point where the density vanishes like |y - x0|^beta.
struct VanishingPoint {
  double x0 = 0.0;
  double beta = 0.0;
};

namespace density_kind {

struct Uniform {};

/// mu(y) = normalizer * |y - x0|^beta on [0, 1].
struct PowerCusp {
  double x0 = 0.5;
  double beta = 1.0;
  double normalizer = 1.0;
};

/// Piecewise-linear density through (knots[i], values[i]); knots span [0, 1].
struct PiecewiseLinear {
  std::vector<double> knots;
  std::vector<double> values;     // already normalized
  std::vector<double> cumulative; // mass of [0, knots[i]]
};

/// Arbitrary density handle, integrated numerically unless a CDF is supplied.
struct Custom {
  std::function<double(double)> density;
  std::function<double(double)> cdf;  // optional, may be empty
  double total = 1.0;                 // mass of the raw handle on [0, 1]
  std::vector<VanishingPoint> vanishing;
};

}  // namespace density_kind

class DesignDensity {
 public:
  using Kind = std::variant<density_kind::Uniform, density_kind::PowerCusp,
                            density_kind::PiecewiseLinear, density_kind::Custom>;

  static constexpr double kQuadratureTolerance = 1e-12;
  static constexpr double kQuantileTolerance = 1e-12;

  static DesignDensity uniform() { return DesignDensity(density_kind::Uniform{}); }

  static DesignDensity power_cusp(double x0, double beta) {
    if (!(x0 >= 0.0 && x0 <= 1.0)) throw InputError("power_cusp: x0 must lie in [0, 1]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InputError("power_cusp: beta must be >= 0");
    const double p = beta + 1.0;
    const double raw = (std::pow(x0, p) + std::pow(1.0 - x0, p)) / p;
    return DesignDensity(density_kind::PowerCusp{x0, beta, 1.0 / raw});
  }

  static DesignDensity piecewise_linear(std::vector<double> knots, std::vector<double> values) {
    if (knots.size() < 2 || knots.size() != values.size())
      throw InputError("piecewise_linear: need matching knots/values, at least two");
    if (knots.front() != 0.0 || knots.back() != 1.0)
      throw InputError("piecewise_linear: knots must start at 0 and end at 1");
    for (std::size_t i = 0; i + 1 < knots.size(); ++i)
      if (!(knots[i] < knots[i + 1])) throw InputError("piecewise_linear: knots must increase");
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
        throw InputError("piecewise_linear: values must be finite and >= 0");
      if (i + 1 < values.size()) total += 0.5 * (values[i] + values[i + 1]) * (knots[i + 1] - knots[i]);
    }
    if (!(total > 0.0)) throw InputError("piecewise_linear: density not normalizable");
    density_kind::PiecewiseLinear pl;
    pl.knots = std::move(knots);
    pl.values = std::move(values);
    for (auto& v : pl.values) v /= total;
    pl.cumulative.assign(pl.knots.size(), 0.0);
    for (std::size_t i = 0; i + 1 < pl.knots.size(); ++i)
      pl.cumulative[i + 1] =
          pl.cumulative[i] + 0.5 * (pl.values[i] + pl.values[i + 1]) * (pl.knots[i + 1] - pl.knots[i]);
    return DesignDensity(std::move(pl));
  }

  /// `density` need not be normalized; it is divided by its mass on [0, 1].
  static DesignDensity custom(std::function<double(double)> density,
                              std::function<double(double)> cdf = {},
                              std::vector<VanishingPoint> vanishing = {}) {
    if (!density) throw InputError("custom density: empty handle");
    density_kind::Custom c{std::move(density), std::move(cdf), 1.0, std::move(vanishing)};
    double total = 0.0;
    if (c.cdf) {
      total = c.cdf(1.0) - c.cdf(0.0);
    } else {
      total = integrate(c.density, 0.0, 1.0);
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw InputError("custom density: not normalizable");
    c.total = total;
    return DesignDensity(std::move(c));
  }

  const Kind& kind() const noexcept { return kind_; }

  std::string name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, density_kind::Uniform>) return "uniform";
          else if constexpr (std::is_same_v<T, density_kind::PowerCusp>) return "power_cusp";
          else if constexpr (std::is_same_v<T, density_kind::PiecewiseLinear>) return "piecewise_linear";
          else return "custom";
        },
        kind_);
  }

  std::vector<VanishingPoint> vanishing_points() const {
    return std::visit(
        [](const auto& k) -> std::vector<VanishingPoint> {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, density_kind::PowerCusp>) {
            if (k.beta > 0.0) return {{k.x0, k.beta}};
            return {};
          } else if constexpr (std::is_same_v<T, density_kind::PiecewiseLinear>) {
            std::vector<VanishingPoint> out;
            for (std::size_t i = 0; i < k.values.size(); ++i)
              if (k.values[i] == 0.0) out.push_back({k.knots[i], 1.0});
            return out;
          } else if constexpr (std::is_same_v<T, density_kind::Custom>) {
            return k.vanishing;
          } else {
            return {};
          }
        },
        kind_);
  }

  /// Largest vanishing exponent (0 when the density is bounded away from zero).
  double max_beta() const {
    double beta = 0.0;
    for (const auto& v : vanishing_points()) beta = std::max(beta, v.beta);
    return beta;
  }

  double operator()(double y) const {
    if (y < 0.0 || y > 1.0) return 0.0;
    return std::visit(
        [y](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, density_kind::Uniform>) {
            return 1.0;
          } else if constexpr (std::is_same_v<T, density_kind::PowerCusp>) {
            return k.normalizer * std::pow(std::abs(y - k.x0), k.beta);
          } else if constexpr (std::is_same_v<T, density_kind::PiecewiseLinear>) {
            const auto seg = segment_of(k, y);
            const double t = (y - k.knots[seg]) / (k.knots[seg + 1] - k.knots[seg]);
            return k.values[seg] + t * (k.values[seg + 1] - k.values[seg]);
          } else {
            return k.density(y) / k.total;
          }
        },
        kind_);
  }

  /// mu([0, y]) for y in [0, 1].
  double cdf(double y) const { return interval_mass({0.0, y}); }

  /// mu(I ∩ [0, 1]); closed form for all kinds except handle-only Custom.
  double interval_mass(const Interval& interval) const {
    require_valid(interval);
    const Interval c = clip_unit(interval);
    if (c.length() == 0.0) return 0.0;
    return std::visit([&](const auto& k) { return mass_of(k, c.lo, c.hi); }, kind_);
  }

  /// Inverse CDF; closed form where available, bisection otherwise.
  double quantile(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    return std::visit([u, this](const auto& k) { return quantile_of(k, u); }, kind_);
  }

  static double integrate(const std::function<double(double)>& f, double a, double b) {
    if (a >= b) return 0.0;
    double error = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, a, b, 20, kQuadratureTolerance, &error);
    return value;
  }

 private:
  explicit DesignDensity(Kind kind) : kind_(std::move(kind)) {}

  // (d + w)^p - d^p without cancellation.
  static double power_increment(double d, double w, double p) {
    if (w <= 0.0) return 0.0;
    if (d <= 0.0) return std::pow(w, p);
    return std::pow(d, p) * std::expm1(p * std::log1p(w / d));
  }

  static double mass_of(const density_kind::Uniform&, double lo, double hi) { return hi - lo; }

  static double mass_of(const density_kind::PowerCusp& k, double lo, double hi) {
    const double p = k.beta + 1.0;
    const double scale = k.normalizer / p;
    if (hi <= k.x0) return scale * power_increment(k.x0 - hi, hi - lo, p);
    if (lo >= k.x0) return scale * power_increment(lo - k.x0, hi - lo, p);
    return scale * (std::pow(k.x0 - lo, p) + std::pow(hi - k.x0, p));
  }

  static std::size_t segment_of(const density_kind::PiecewiseLinear& k, double y) {
    auto it = std::upper_bound(k.knots.begin(), k.knots.end(), y);
    std::size_t seg = it == k.knots.begin() ? 0 : static_cast<std::size_t>(it - k.knots.begin()) - 1;
    return std::min(seg, k.knots.size() - 2);
  }

  // Mass of [knots[seg], y] for y inside segment seg.
  static double partial_mass(const density_kind::PiecewiseLinear& k, std::size_t seg, double y) {
    const double width = k.knots[seg + 1] - k.knots[seg];
    const double z = y - k.knots[seg];
    const double slope = (k.values[seg + 1] - k.values[seg]) / width;
    return k.values[seg] * z + 0.5 * slope * z * z;
  }

  static double mass_of(const density_kind::PiecewiseLinear& k, double lo, double hi) {
    const auto mass_upto = [&](double y) {
      const auto seg = segment_of(k, y);
      return k.cumulative[seg] + partial_mass(k, seg, y);
    };
    return std::max(0.0, mass_upto(hi) - mass_upto(lo));
  }

  static double mass_of(const density_kind::Custom& k, double lo, double hi) {
    if (k.cdf) return std::max(0.0, (k.cdf(hi) - k.cdf(lo)) / k.total);
    return std::max(0.0, integrate(k.density, lo, hi) / k.total);
  }

  static double quantile_of(const density_kind::Uniform&, double u) { return u; }

  static double quantile_of(const density_kind::PowerCusp& k, double u) {
    const double p = k.beta + 1.0;
    const double left = std::pow(k.x0, p);
    const double target = u * p / k.normalizer;
    if (target <= left) return std::clamp(k.x0 - std::pow(left - target, 1.0 / p), 0.0, 1.0);
    return std::clamp(k.x0 + std::pow(target - left, 1.0 / p), 0.0, 1.0);
  }

  static double quantile_of(const density_kind::PiecewiseLinear& k, double u) {
    auto it = std::upper_bound(k.cumulative.begin(), k.cumulative.end(), u);
    std::size_t seg = it == k.cumulative.begin() ? 0 : static_cast<std::size_t>(it - k.cumulative.begin()) - 1;
    seg = std::min(seg, k.knots.size() - 2);
    const double target = u - k.cumulative[seg];
    const double width = k.knots[seg + 1] - k.knots[seg];
    const double v0 = k.values[seg];
    const double slope = (k.values[seg + 1] - v0) / width;
    double z;
    if (std::abs(slope) * width < 1e-14 * std::max(v0, 1e-300)) {
      z = v0 > 0.0 ? target / v0 : 0.0;
    } else {
      const double disc = std::max(0.0, v0 * v0 + 2.0 * slope * target);
      const double denom = v0 + std::sqrt(disc);
      z = denom > 0.0 ? 2.0 * target / denom : 0.0;
    }
    return std::clamp(k.knots[seg] + std::clamp(z, 0.0, width), 0.0, 1.0);
  }

  double quantile_of(const density_kind::Custom&, double u) const {
    double lo = 0.0, hi = 1.0;
    while (hi - lo > kQuantileTolerance) {
      const double mid = 0.5 * (lo + hi);
      if (cdf(mid) < u) lo = mid;
      else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  Kind kind_;
};

/// Observations sorted by design point.
struct Sample {
  std::vector<double> xs;
  std::vector<double> ys;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> sort_index;  // sorted position -> draw position

  std::size_t size() const noexcept { return xs.size(); }
};

/// Sorts (x, y) pairs by x (stable, so ties keep draw order).
inline Sample make_sample(std::vector<double> xs, std::vector<double> ys, double sigma,
                          std::uint64_t seed = 0) {
  if (xs.size() != ys.size()) throw InputError("make_sample: xs and ys differ in length");
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  Sample s;
  s.sigma = sigma;
  s.seed = seed;
  s.xs.resize(xs.size());
  s.ys.resize(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    s.xs[i] = xs[order[i]];
    s.ys[i] = ys[order[i]];
  }
  s.sort_index = std::move(order);
  return s;
}

/// Sorted design points drawn i.i.d. from mu on the design stream of `seed`.
struct Design {
  std::vector<double> xs;
  std::vector<std::size_t> sort_index;
  std::uint64_t seed = 0;
};

inline Design draw_design(const DesignDensity& density, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InputError("sample size must be >= 1");
  Engine engine = make_engine(derive_seed(seed, Stream::design));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> draws(n);
  for (auto& x : draws) x = density.quantile(unif(engine));
  Design d;
  d.seed = seed;
  d.sort_index.resize(n);
  std::iota(d.sort_index.begin(), d.sort_index.end(), std::size_t{0});
  std::stable_sort(d.sort_index.begin(), d.sort_index.end(),
                   [&](std::size_t a, std::size_t b) { return draws[a] < draws[b]; });
  d.xs.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.xs[i] = draws[d.sort_index[i]];
  return d;
}

/// Responses for a fixed design; noise comes from the noise stream of `noise_seed`
/// and is indexed by draw order, so it does not depend on the sort.
template <class F>
Sample draw_responses(const Design& design, F&& f, double sigma, std::uint64_t noise_seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be >= 0");
  const std::size_t n = design.xs.size();
  std::vector<double> noise(n, 0.0);
  if (sigma > 0.0) {
    Engine engine = make_engine(derive_seed(noise_seed, Stream::noise));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& e : noise) e = gauss(engine);
  }
  Sample s;
  s.xs = design.xs;
  s.sort_index = design.sort_index;
  s.sigma = sigma;
  s.seed = noise_seed;
  s.ys.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double fx = f(s.xs[i]);
    s.ys[i] = sigma > 0.0 ? fx + sigma * noise[s.sort_index[i]] : fx;
  }
  return s;
}

template <class F>
Sample sample_model(const DesignDensity& density, F&& f, double sigma, std::size_t n,
                    std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be >= 0");
  return draw_responses(draw_design(density, n, seed), std::forward<F>(f), sigma, seed);
}

/// Counting view over sorted design points, closed intervals.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(std::span<const double> sorted_xs) : xs_(sorted_xs) {}
  explicit EmpiricalMeasure(const Sample& s) : xs_(s.xs) {}

  std::size_t n() const noexcept { return xs_.size(); }
  std::span<const double> points() const noexcept { return xs_; }

  /// Indices [first, last) of the points inside the closed interval.
  std::pair<std::size_t, std::size_t> index_range(const Interval& d) const {
    require_valid(d);
    const auto first = std::lower_bound(xs_.begin(), xs_.end(), d.lo);
    const auto last = std::upper_bound(first, xs_.end(), d.hi);
    return {static_cast<std::size_t>(first - xs_.begin()),
            static_cast<std::size_t>(last - xs_.begin())};
  }

  /// n * mu_bar_n(d): the exact number of points in d.
  std::size_t count(const Interval& d) const {
    const auto [first, last] = index_range(d);
    return last - first;
  }

  double mass(const Interval& d) const {
    return n() == 0 ? 0.0 : static_cast<double>(count(d)) / static_cast<double>(n());
  }

 private:
  std::span<const double> xs_;
};

/// <g1, g2>_d = (1 / count) * sum over X_i in d of g1(X_i) g2(X_i).
template <class G1, class G2>
double localized_inner(const EmpiricalMeasure& em, const Interval& d, G1&& g1, G2&& g2) {
  const auto [first, last] = em.index_range(d);
  if (first == last) throw EmptyWindowError("localized inner product over an empty window");
  const auto xs = em.points();
  double acc = 0.0;
  for (std::size_t i = first; i < last; ++i) acc += g1(xs[i]) * g2(xs[i]);
  return acc / static_cast<double>(last - first);
}

template <class G>
double localized_norm(const EmpiricalMeasure& em, const Interval& d, G&& g) {
  return std::sqrt(std::max(0.0, localized_inner(em, d, g, g)));
}

/// <Y, g>_d for the responses of `sample`.
template <class G>
double localized_response_inner(const Sample& sample, const EmpiricalMeasure& em,
                                const Interval& d, G&& g) {
  const auto [first, last] = em.index_range(d);
  if (first == last) throw EmptyWindowError("localized inner product over an empty window");
  double acc = 0.0;
  for (std::size_t i = first; i < last; ++i) acc += sample.ys[i] * g(sample.xs[i]);
  return acc / static_cast<double>(last - first);
}

}  // namespace supreg
