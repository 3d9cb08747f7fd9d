#pragma once

// Lepski-type selection of the local window among a grid of nested intervals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "supreg/design.hpp"
#include "supreg/error.hpp"
#include "supreg/interval.hpp"
#include "supreg/lpe.hpp"
#include "supreg/moments.hpp"

namespace supreg {

enum class GridKind { full, geometric };

inline GridKind parse_grid_kind(const std::string& name) {
  if (name == "full") return GridKind::full;
  if (name == "geom" || name == "geometric") return GridKind::geometric;
  throw InputError("unknown grid kind '" + name + "' (expected full or geom)");
}

inline std::string to_string(GridKind kind) {
  return kind == GridKind::full ? "full" : "geom";
}

struct GridOptions {
  GridKind kind = GridKind::geometric;
  double ratio = 2.0;  // a > 1, geometric grid only

  void validate() const {
    if (kind == GridKind::geometric && !(ratio > 1.0))
      throw InputError("geometric grid ratio a must be > 1");
  }
};

struct Candidate {
  Interval window;
  std::size_t first = 0;  // design points [first, last) lie in the window
  std::size_t last = 0;
  double half_width = 0.0;    // full grid
  std::size_t low_rank = 0;   // geometric grid: [a^p]
  std::size_t high_rank = 0;  // geometric grid: [a^q]

  std::size_t count() const noexcept { return last - first; }
};

struct BandwidthGrid {
  double knot = 0.0;
  GridKind kind = GridKind::full;
  double ratio = 0.0;
  std::size_t n = 0;
  std::vector<Candidate> candidates;  // ascending (count, length, lo)

  std::size_t size() const noexcept { return candidates.size(); }

  /// Whether candidate j is contained in candidate i.
  bool nested(std::size_t i, std::size_t j) const {
    const Candidate& outer = candidates[i];
    const Candidate& inner = candidates[j];
    if (kind == GridKind::full) return inner.half_width <= outer.half_width;
    return inner.low_rank <= outer.low_rank && inner.high_rank <= outer.high_rank;
  }
};

namespace detail {

inline void sort_candidates(std::vector<Candidate>& c) {
  std::stable_sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    return std::make_tuple(a.count(), a.window.length(), a.window.lo) <
           std::make_tuple(b.count(), b.window.length(), b.window.lo);
  });
}

// Points X_j with |X_j - x| <= w form a contiguous run of the sorted sample.
inline std::pair<std::size_t, std::size_t> half_width_range(std::span<const double> xs, double x,
                                                            double w) {
  const auto mid = std::lower_bound(xs.begin(), xs.end(), x);
  const auto first = std::partition_point(xs.begin(), mid, [&](double v) { return x - v > w; });
  const auto last = std::partition_point(mid, xs.end(), [&](double v) { return v - x <= w; });
  return {static_cast<std::size_t>(first - xs.begin()), static_cast<std::size_t>(last - xs.begin())};
}

}  // namespace detail

/// Symmetric windows [x - |X_i - x|, x + |X_i - x|], identical windows merged.
inline BandwidthGrid build_full_grid(std::span<const double> xs, double knot) {
  BandwidthGrid grid;
  grid.knot = knot;
  grid.kind = GridKind::full;
  grid.n = xs.size();
  std::vector<double> widths(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) widths[i] = std::abs(xs[i] - knot);
  std::sort(widths.begin(), widths.end());
  widths.erase(std::unique(widths.begin(), widths.end()), widths.end());
  grid.candidates.reserve(widths.size());
  for (double w : widths) {
    Candidate c;
    c.half_width = w;
    std::tie(c.first, c.last) = detail::half_width_range(xs, knot, w);
    // Widen by rounding only, so the window surely holds its generating points.
    c.window = {std::min(knot - w, c.first < c.last ? xs[c.first] : knot - w),
                std::max(knot + w, c.first < c.last ? xs[c.last - 1] : knot + w)};
    grid.candidates.push_back(c);
  }
  detail::sort_candidates(grid.candidates);
  return grid;
}

/// Order-statistic windows [X_(i+1-[a^p]), X_(i+[a^q])] with i = #{X_j <= x},
/// padded by X_(0) = 0 and X_(n+1) = 1.
inline BandwidthGrid build_geometric_grid(std::span<const double> xs, double knot, double a) {
  if (!(a > 1.0)) throw InputError("geometric grid ratio a must be > 1");
  BandwidthGrid grid;
  grid.knot = knot;
  grid.kind = GridKind::geometric;
  grid.ratio = a;
  const std::size_t n = xs.size();
  grid.n = n;
  const std::size_t ik =
      static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), knot) - xs.begin());
  const auto order_stat = [&](std::size_t rank) -> double {
    if (rank == 0) return 0.0;
    if (rank > n) return 1.0;
    return xs[rank - 1];
  };
  const auto ranks = [a](std::size_t limit) {
    // [a^p] for p = 0..[log_a limit]; integer parts, duplicates removed.
    std::vector<std::size_t> out;
    if (limit == 0) return out;
    double power = 1.0;
    while (true) {
      const auto r = static_cast<std::size_t>(std::floor(power * (1.0 + 1e-12)));
      if (r > limit) break;
      if (out.empty() || out.back() != r) out.push_back(r);
      power *= a;
    }
    return out;
  };
  const std::vector<std::size_t> lows = ranks(ik + 1);
  std::vector<std::size_t> highs = ranks(n - ik);
  const bool pad_right = highs.empty();  // knot beyond the last design point
  if (pad_right) highs.push_back(1);
  grid.candidates.reserve(lows.size() * highs.size());
  for (std::size_t A : lows) {
    for (std::size_t B : highs) {
      Candidate c;
      c.low_rank = A;
      c.high_rank = B;
      c.window = {order_stat(ik + 1 - A), order_stat(ik + B)};
      const auto lo = std::lower_bound(xs.begin(), xs.end(), c.window.lo);
      const auto hi = std::upper_bound(lo, xs.end(), c.window.hi);
      c.first = static_cast<std::size_t>(lo - xs.begin());
      c.last = static_cast<std::size_t>(hi - xs.begin());
      grid.candidates.push_back(c);
    }
  }
  detail::sort_candidates(grid.candidates);
  return grid;
}

inline BandwidthGrid build_grid(std::span<const double> xs, double knot, const GridOptions& options) {
  options.validate();
  return options.kind == GridKind::full ? build_full_grid(xs, knot)
                                        : build_geometric_grid(xs, knot, options.ratio);
}

inline BandwidthGrid build_grid(const Sample& sample, double knot, const GridOptions& options) {
  return build_grid(std::span<const double>(sample.xs), knot, options);
}

struct ThresholdParams {
  double sigma = 1.0;
  double D = 2.5;
  double b = 2.0;
  int R = 2;
  double C_R = 1.0 + std::sqrt(3.0);

  ThresholdParams() = default;
  ThresholdParams(double sigma_, double D_, double b_, int R_)
      : sigma(sigma_), D(D_), b(b_), R(R_), C_R(1.0 + std::sqrt(R_ + 1.0)) {
    validate();
  }

  static double min_D(double b) { return std::sqrt(2.0 * (b + 1.0)); }

  void validate() const {
    validate_degree(R);
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be >= 0");
    if (!(b > 0.0)) throw InputError("loss exponent b must be > 0");
    if (!(D > min_D(b))) throw InputError("D must exceed sqrt(2(b+1))");
  }
};

/// T(delta, delta') = sigma [sqrt(log n / c) + D C_R sqrt(log c / c')], where
/// c and c' count the points of delta and delta'; log c is floored at 0.
inline double threshold(const ThresholdParams& params, std::size_t n, std::size_t count_outer,
                        std::size_t count_inner) {
  if (count_outer == 0 || count_inner == 0) throw EmptyWindowError("threshold over an empty window");
  const double c = static_cast<double>(count_outer);
  const double ci = static_cast<double>(count_inner);
  const double log_n = std::log(static_cast<double>(n));
  return params.sigma * (std::sqrt(log_n / c) +
                         params.D * params.C_R * std::sqrt(std::max(0.0, std::log(c)) / ci));
}

inline double threshold(const ThresholdParams& params, const EmpiricalMeasure& em,
                        const Interval& outer, const Interval& inner) {
  return threshold(params, em.n(), em.count(outer), em.count(inner));
}

inline constexpr double kRoundingAllowance = 1e-12;

struct Comparison {
  int p = 0;
  double statistic = 0.0;  // |<f' - f, phi_p>_{delta'}|
  double threshold = 0.0;  // |phi_p|_{delta'} T(delta, delta')
  bool pass = true;
};

/// Compares the fit over delta with the fit over delta' (nested in delta) in
/// direction p.
inline Comparison compare(const LocalFit& outer, const LocalFit& inner, const ThresholdParams& params,
                          std::size_t n, int p) {
  Comparison out;
  out.p = p;
  if (inner.empty) return out;
  const GramSystem& gi = inner.gram;
  // D' (theta' - theta) in the inner window's scaled coordinates.
  const int dim = gi.dim();
  Vector diff(dim);
  const double ratio = gi.scale / outer.gram.scale;
  double power = 1.0;
  for (int q = 0; q < dim; ++q) {
    diff(q) = inner.theta_scaled(q) - outer.theta_scaled(q) * power;
    power *= ratio;
  }
  const double stat_scaled = std::abs(gi.scaled.row(p).dot(diff));
  const double norm_scaled = std::sqrt(std::max(0.0, gi.scaled(p, p)));
  const double T = threshold(params, n, outer.gram.count, gi.count);
  const double lp = std::pow(gi.scale, p);
  // Rounding allowance, so two fits of the same polynomial always agree.
  double magnitude = 0.0;
  power = 1.0;
  for (int q = 0; q < dim; ++q) {
    magnitude += std::abs(gi.scaled(p, q)) *
                 (std::abs(inner.theta_scaled(q)) + std::abs(outer.theta_scaled(q)) * power);
    power *= ratio;
  }
  out.statistic = lp * stat_scaled;
  out.threshold = lp * norm_scaled * T;
  out.pass = stat_scaled <= norm_scaled * T + kRoundingAllowance * magnitude;
  return out;
}

/// Brute-force form of the same statistic through localized inner products.
inline Comparison compare_direct(const LocalFit& outer, const LocalFit& inner, const Sample& sample,
                                 const EmpiricalMeasure& em, const ThresholdParams& params, int p) {
  Comparison out;
  out.p = p;
  if (inner.empty) return out;
  const Interval& w = inner.gram.window;
  const double xk = inner.center();
  const auto phi = [xk, p](double x) { return std::pow(x - xk, p); };
  const auto diff = [&](double x) { return evaluate(inner, x) - evaluate(outer, x); };
  out.statistic = std::abs(localized_inner(em, w, diff, phi));
  out.threshold = localized_norm(em, w, phi) *
                  threshold(params, sample.size(), outer.gram.count, inner.gram.count);
  out.pass = out.statistic <= out.threshold;
  return out;
}

struct ComparisonRecord {
  std::size_t outer = 0;  // candidate indices into the grid
  std::size_t inner = 0;
  Comparison result;
};

struct SelectionTrace {
  std::size_t chosen = 0;
  Interval window;
  std::size_t count = 0;
  std::vector<std::int8_t> status;  // 1 admissible, 0 rejected, -1 not examined
  std::vector<ComparisonRecord> comparisons;
  bool fallback_used = false;
};

/// Fits over grid candidates, computed on first use.
class CandidateFits {
 public:
  CandidateFits(const BandwidthGrid& grid, const MomentTree& tree)
      : grid_(grid), tree_(tree), fits_(grid.size()) {}

  const LocalFit& operator[](std::size_t i) {
    auto& slot = fits_[i];
    if (!slot) {
      const Candidate& c = grid_.candidates[i];
      slot = fit_local(build_gram(tree_, c.first, c.last, grid_.knot, c.window));
    }
    return *slot;
  }

 private:
  const BandwidthGrid& grid_;
  const MomentTree& tree_;
  std::vector<std::optional<LocalFit>> fits_;
};

enum class TraceDetail { minimal, full };

/// Admissibility of candidate i against every nonempty nested candidate, in
/// descending count order; stops at the first failure unless `exhaustive`.
inline bool admissible(const BandwidthGrid& grid, CandidateFits& fits, const ThresholdParams& params,
                       std::size_t i, std::vector<ComparisonRecord>* records, bool record_passes,
                       bool exhaustive = false) {
  const LocalFit& outer = fits[i];
  bool ok = true;
  for (std::size_t j = i; j-- > 0;) {
    if (grid.candidates[j].count() == 0) continue;
    if (!grid.nested(i, j)) continue;
    const LocalFit& inner = fits[j];
    for (int p = 0; p <= params.R; ++p) {
      const Comparison cmp = compare(outer, inner, params, grid.n, p);
      if (records && (record_passes || !cmp.pass)) records->push_back({i, j, cmp});
      if (!cmp.pass) {
        ok = false;
        if (!exhaustive) return false;
        break;
      }
    }
  }
  // Candidates later in the order with equal count may still be nested.
  for (std::size_t j = i + 1; j < grid.size(); ++j) {
    if (grid.candidates[j].count() != grid.candidates[i].count()) break;
    if (!grid.nested(i, j)) continue;
    const LocalFit& inner = fits[j];
    for (int p = 0; p <= params.R; ++p) {
      const Comparison cmp = compare(outer, inner, params, grid.n, p);
      if (records && (record_passes || !cmp.pass)) records->push_back({i, j, cmp});
      if (!cmp.pass) {
        ok = false;
        if (!exhaustive) return false;
        break;
      }
    }
  }
  return ok;
}

/// Index visiting order: descending count, then longer, then leftmost.
inline std::vector<std::size_t> selection_order(const BandwidthGrid& grid) {
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Candidate& ca = grid.candidates[a];
    const Candidate& cb = grid.candidates[b];
    if (ca.count() != cb.count()) return ca.count() > cb.count();
    if (ca.window.length() != cb.window.length()) return ca.window.length() > cb.window.length();
    return ca.window.lo < cb.window.lo;
  });
  return order;
}

inline SelectionTrace select_bandwidth(const BandwidthGrid& grid, CandidateFits& fits,
                                       const ThresholdParams& params,
                                       TraceDetail detail = TraceDetail::minimal) {
  if (grid.size() == 0) throw EmptyGridError("bandwidth grid has no candidates");
  SelectionTrace trace;
  trace.status.assign(grid.size(), -1);
  const bool record_passes = detail == TraceDetail::full;
  std::optional<std::size_t> smallest_nonempty;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid.candidates[i].count() > 0) {
      smallest_nonempty = i;
      break;
    }
  if (!smallest_nonempty) throw EmptyGridError("every candidate window is empty");
  std::optional<std::size_t> chosen;
  for (std::size_t i : selection_order(grid)) {
    if (grid.candidates[i].count() == 0) break;
    std::vector<ComparisonRecord> local;
    const bool ok = admissible(grid, fits, params, i, &local, record_passes);
    trace.status[i] = ok ? 1 : 0;
    // Rejections keep their failing comparison; the chosen window keeps all
    // of its comparisons at full detail.
    trace.comparisons.insert(trace.comparisons.end(), local.begin(), local.end());
    if (ok) {
      chosen = i;
      break;
    }
  }
  if (!chosen) {
    chosen = *smallest_nonempty;
    trace.fallback_used = true;
  }
  trace.chosen = *chosen;
  trace.window = grid.candidates[*chosen].window;
  trace.count = grid.candidates[*chosen].count();
  return trace;
}

/// Convenience overload that builds its own moment tree.
inline SelectionTrace select_bandwidth(const Sample& sample, const BandwidthGrid& grid,
                                       const ThresholdParams& params,
                                       TraceDetail detail = TraceDetail::minimal) {
  const MomentTree tree(sample.xs, sample.ys, params.R);
  CandidateFits fits(grid, tree);
  return select_bandwidth(grid, fits, params, detail);
}

/// Largest-count grid candidate with L |delta|^s <= sigma sqrt(log n / (n mu_n(delta))).
inline std::optional<std::size_t> ideal_window(const BandwidthGrid& grid, double s, double L,
                                               double sigma) {
  std::optional<std::size_t> best;
  const double log_n = std::log(static_cast<double>(grid.n));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Candidate& c = grid.candidates[i];
    if (c.count() == 0) continue;
    const double bias = L * std::pow(c.window.length(), s);
    const double noise = sigma * std::sqrt(log_n / static_cast<double>(c.count()));
    if (bias <= noise && (!best || c.count() >= grid.candidates[*best].count())) best = i;
  }
  return best;
}

}  // namespace supreg
