#pragma once

// Range moment queries over sorted design points. Each tree node keeps power
// sums about its own center, and a query shifts them to the requested center
// by binomial expansion, so small windows never suffer from cancellation.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "supreg/error.hpp"
#include "supreg/linalg.hpp"

namespace supreg {

/// Sums over a window, in scaled coordinates u = (x - center) / scale:
/// t[m] = sum u^m (m <= 2R), u[m] = sum y u^m (m <= R).
struct MomentSums {
  std::size_t count = 0;
  std::array<double, 2 * kMaxDegree + 1> t{};
  std::array<double, kMaxDegree + 1> u{};
};

class MomentTree {
 public:
  static constexpr std::size_t kLeafSize = 16;

  MomentTree(std::span<const double> xs, std::span<const double> ys, int degree)
      : xs_(xs), ys_(ys), degree_(degree) {
    if (degree < 0 || degree > kMaxDegree) throw InputError("degree R must be in [0, 5]");
    if (xs.size() != ys.size()) throw InputError("moment tree: xs and ys differ in length");
    binom_[0][0] = 1.0;
    for (int m = 1; m <= 2 * kMaxDegree; ++m) {
      binom_[m][0] = binom_[m][m] = 1.0;
      for (int j = 1; j < m; ++j) binom_[m][j] = binom_[m - 1][j - 1] + binom_[m - 1][j];
    }
    if (!xs.empty()) build(0, xs.size());
  }

  int degree() const noexcept { return degree_; }
  std::size_t size() const noexcept { return xs_.size(); }

  /// Moments of points [first, last) about `center` in units of `scale`.
  MomentSums query(std::size_t first, std::size_t last, double center, double scale) const {
    MomentSums out;
    if (first >= last) return out;
    const double inv = 1.0 / scale;
    if (!nodes_.empty()) visit(0, 0, xs_.size(), first, last, center, inv, out);
    out.count = last - first;
    return out;
  }

 private:
  struct Node {
    double center = 0.0;
    std::array<double, 2 * kMaxDegree + 1> t{};  // sum (x - center)^m
    std::array<double, kMaxDegree + 1> u{};      // sum y (x - center)^m
    int left = -1;
    int right = -1;
  };

  int build(std::size_t first, std::size_t last) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const double c = 0.5 * (xs_[first] + xs_[last - 1]);
    if (last - first > kLeafSize) {
      const std::size_t mid = first + (last - first) / 2;
      const int l = build(first, mid);
      const int r = build(mid, last);
      nodes_[id].left = l;
      nodes_[id].right = r;
    }
    Node& node = nodes_[id];
    node.center = c;
    for (std::size_t i = first; i < last; ++i) {
      const double d = xs_[i] - c;
      double p = 1.0;
      for (int m = 0; m <= 2 * degree_; ++m) {
        node.t[m] += p;
        if (m <= degree_) node.u[m] += ys_[i] * p;
        p *= d;
      }
    }
    return id;
  }

  void direct(std::size_t first, std::size_t last, double center, double inv,
              MomentSums& out) const {
    for (std::size_t i = first; i < last; ++i) {
      const double d = (xs_[i] - center) * inv;
      double p = 1.0;
      for (int m = 0; m <= 2 * degree_; ++m) {
        out.t[m] += p;
        if (m <= degree_) out.u[m] += ys_[i] * p;
        p *= d;
      }
    }
  }

  void shift(const Node& node, double center, double inv, MomentSums& out) const {
    const double d = (node.center - center) * inv;
    std::array<double, 2 * kMaxDegree + 1> dp{};
    std::array<double, 2 * kMaxDegree + 1> ts{};
    std::array<double, kMaxDegree + 1> us{};
    dp[0] = 1.0;
    double scale = 1.0;
    for (int m = 0; m <= 2 * degree_; ++m) {
      if (m > 0) dp[m] = dp[m - 1] * d;
      ts[m] = node.t[m] * scale;
      if (m <= degree_) us[m] = node.u[m] * scale;
      scale *= inv;
    }
    for (int m = 0; m <= 2 * degree_; ++m) {
      double acc = 0.0;
      for (int j = 0; j <= m; ++j) acc += binom_[m][j] * ts[j] * dp[m - j];
      out.t[m] += acc;
      if (m <= degree_) {
        double accy = 0.0;
        for (int j = 0; j <= m; ++j) accy += binom_[m][j] * us[j] * dp[m - j];
        out.u[m] += accy;
      }
    }
  }

  void visit(int id, std::size_t lo, std::size_t hi, std::size_t first, std::size_t last,
             double center, double inv, MomentSums& out) const {
    if (last <= lo || hi <= first) return;
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (first <= lo && hi <= last) {
      shift(node, center, inv, out);
      return;
    }
    if (node.left < 0) {
      direct(std::max(lo, first), std::min(hi, last), center, inv, out);
      return;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    visit(node.left, lo, mid, first, last, center, inv, out);
    visit(node.right, mid, hi, first, last, center, inv, out);
  }

  std::span<const double> xs_;
  std::span<const double> ys_;
  int degree_;
  std::vector<Node> nodes_;
  std::array<std::array<double, 2 * kMaxDegree + 1>, 2 * kMaxDegree + 1> binom_{};
};

}  // namespace supreg
