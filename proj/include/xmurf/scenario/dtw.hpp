#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "../core/error.hpp"

namespace xmurf::scenario {

/// Dynamic time warping distance with local cost |a - b|, unconstrained
/// window, both endpoints aligned. O(n m) time, O(m) memory.
inline double dtw_distance(std::span<const double> s1, std::span<const double> s2) {
  if (s1.empty() || s2.empty()) throw ConfigError("dtw_distance: empty sequence");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = s2.size();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (double a : s1) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j)
      cur[j] = std::abs(a - s2[j - 1]) + std::min({prev[j], cur[j - 1], prev[j - 1]});
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace xmurf::scenario
