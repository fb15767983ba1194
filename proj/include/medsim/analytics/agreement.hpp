#pragma once

#include <cstddef>
#include <cstdlib>
#include <span>
#include <utility>

#include "medsim/core/error.hpp"

namespace medsim::analytics {

struct ScorePair {
  int human = 0;
  int ai = 0;
};

struct AgreementResult {
  double exact = 0.0;
  double off_by_one = 0.0;
  double thresholded = 0.0;
  std::size_t n_pairs = 0;
};

// Proficiency bucket: 1-2 below threshold, 3-5 at or above.
inline bool proficient(int score) { return score >= 3; }

inline AgreementResult scoring_agreement(std::span<const ScorePair> pairs) {
  if (pairs.empty()) throw Error("empty_input", "no score pairs to compare");
  std::size_t exact = 0, adjacent = 0, bucket = 0;
  for (const auto& p : pairs) {
    if (p.human < 1 || p.human > 5 || p.ai < 1 || p.ai > 5)
      throw Error("invalid_input", "scores must lie in 1..5");
    const int gap = std::abs(p.human - p.ai);
    exact += gap == 0;
    adjacent += gap <= 1;
    bucket += proficient(p.human) == proficient(p.ai);
  }
  const double n = static_cast<double>(pairs.size());
  return {static_cast<double>(exact) / n, static_cast<double>(adjacent) / n,
          static_cast<double>(bucket) / n, pairs.size()};
}

}  // namespace medsim::analytics
