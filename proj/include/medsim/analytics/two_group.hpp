#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "medsim/analytics/descriptive.hpp"
#include "medsim/analytics/special_functions.hpp"
#include "medsim/analytics/test_result.hpp"
#include "medsim/core/error.hpp"

namespace medsim::analytics {

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

struct EffectSize {
  double d = 0.0;
  std::string pooling = "rms_sd";  // sqrt((sd_a^2 + sd_b^2) / 2)
};

namespace detail {
inline void check_group(const SummaryStats& s, const char* label) {
  if (s.n < 2)
    throw Error("insufficient_data", std::string("group ") + label + " needs n >= 2");
  if (!(s.sd >= 0.0) || !std::isfinite(s.mean))
    throw Error("invalid_input", std::string("group ") + label + " has invalid mean/sd");
}
}  // namespace detail

// Two-sided Welch test of mean_a - mean_b with Satterthwaite degrees of freedom.
inline TestResult welch_t(const SummaryStats& a, const SummaryStats& b) {
  detail::check_group(a, "a");
  detail::check_group(b, "b");
  TestResult r;
  r.method = "welch_t";
  const double va = a.sd * a.sd / static_cast<double>(a.n);
  const double vb = b.sd * b.sd / static_cast<double>(b.n);
  const double diff = a.mean - b.mean;
  if (va + vb == 0.0) {
    r.note = "zero_variance";
    if (diff == 0.0) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = diff > 0 ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return r;
  }
  const double se2 = va + vb;
  r.statistic = diff / std::sqrt(se2);
  const double df = se2 * se2 /
                    (va * va / static_cast<double>(a.n - 1) + vb * vb / static_cast<double>(b.n - 1));
  r.df = df;
  r.p_value = std::clamp(special::student_t_two_sided(r.statistic, df), 0.0, 1.0);
  return r;
}

// Standardized difference (mean_b - mean_a) over the root-mean-square SD, the
// pooled SD for equal group sizes. Positive when group b scores higher.
inline EffectSize cohens_d(const SummaryStats& a, const SummaryStats& b) {
  detail::check_group(a, "a");
  detail::check_group(b, "b");
  const double diff = b.mean - a.mean;
  const double pooled = std::sqrt((a.sd * a.sd + b.sd * b.sd) / 2.0);
  EffectSize e;
  if (pooled == 0.0) {
    e.d = diff == 0.0 ? 0.0
                      : (diff > 0 ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity());
    return e;
  }
  e.d = diff / pooled;
  return e;
}

inline SummaryStats summarize(std::span<const double> xs) {
  auto m = mean_sd(xs);
  return SummaryStats{m.mean, xs.size() < 2 ? 0.0 : m.sd, m.n};
}

}  // namespace medsim::analytics
