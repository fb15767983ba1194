#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>

namespace medsim::analytics {

struct MeanSd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();  // sample SD (n - 1)
  std::size_t n = 0;
};

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Two-pass sample standard deviation; NaN below two observations.
inline double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline MeanSd mean_sd(std::span<const double> xs) {
  return MeanSd{mean(xs), sample_sd(xs), xs.size()};
}

}  // namespace medsim::analytics
