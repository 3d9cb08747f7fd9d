#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "supreg/error.hpp"

namespace supreg {

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  constexpr double length() const noexcept { return hi - lo; }
  constexpr bool contains(double x) const noexcept { return lo <= x && x <= hi; }
  constexpr bool contains(const Interval& other) const noexcept {
    return lo <= other.lo && other.hi <= hi;
  }
  constexpr bool valid() const noexcept { return lo <= hi; }

  friend constexpr bool operator==(const Interval&, const Interval&) = default;
};

inline void require_valid(const Interval& interval) {
  if (!(interval.lo <= interval.hi)) {
    std::ostringstream msg;
    msg << "malformed interval [" << interval.lo << ", " << interval.hi << "]";
    throw InputError(msg.str());
  }
}

/// Intersection with [0, 1]; empty intersections collapse to a zero-length interval.
inline Interval clip_unit(const Interval& interval) {
  const double lo = std::clamp(interval.lo, 0.0, 1.0);
  const double hi = std::clamp(interval.hi, 0.0, 1.0);
  return lo <= hi ? Interval{lo, hi} : Interval{lo, lo};
}

inline Interval symmetric_window(double center, double half_width) {
  return {center - half_width, center + half_width};
}

}  // namespace supreg
