#pragma once

#include <algorithm>
#include <vector>

namespace momentlab {

/// Closed interval [lo, hi] on the real line.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double t) const { return lo <= t && t <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

using IntervalSet = std::vector<Interval>;

// Sorts and merges overlapping or touching intervals.
inline IntervalSet normalize(IntervalSet set) {
  std::sort(set.begin(), set.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  IntervalSet out;
  for (const auto& iv : set) {
    if (!out.empty() && iv.lo <= out.back().hi) {
      out.back().hi = std::max(out.back().hi, iv.hi);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

/// Intersection of two normalized interval sets.
inline IntervalSet intersect(const IntervalSet& a, const IntervalSet& b) {
  IntervalSet out;
  std::size_t i = 0, k = 0;
  while (i < a.size() && k < b.size()) {
    const double lo = std::max(a[i].lo, b[k].lo);
    const double hi = std::min(a[i].hi, b[k].hi);
    if (lo <= hi) out.push_back({lo, hi});
    if (a[i].hi < b[k].hi) {
      ++i;
    } else {
      ++k;
    }
  }
  return out;
}

}  // namespace momentlab
