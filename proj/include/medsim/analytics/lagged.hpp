#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "medsim/analytics/telemetry.hpp"

namespace medsim::analytics {

// Predictors observed at session k paired with the MIRS change to session k+1.
struct LaggedChange {
  std::string learner_id;
  std::string session_id;
  std::string next_session_id;
  std::string institution_id;
  std::string case_id;
  Modality modality = Modality::text;
  std::size_t session_index = 0;  // completed sessions as of session k (1-based)
  double reflection_char_length = 0.0;
  double turn_count = 0.0;
  double duration_minutes = 0.0;
  double mirs = 0.0;
  double next_mirs = 0.0;
  double delta_mirs = 0.0;
};

// Consecutive-session MIRS deltas per learner over non-excluded, scored rows,
// ordered by completion time. Learners with fewer than two such sessions
// contribute nothing.
inline std::vector<LaggedChange> lagged_mirs_change(const std::vector<TelemetryRow>& rows) {
  std::map<std::string, std::vector<const TelemetryRow*>> by_learner;
  for (const auto& r : rows)
    if (!r.excluded && !std::isnan(r.mirs_overall)) by_learner[r.learner_id].push_back(&r);
  std::vector<LaggedChange> out;
  for (auto& [learner, rs] : by_learner) {
    std::stable_sort(rs.begin(), rs.end(), [](const TelemetryRow* a, const TelemetryRow* b) {
      return a->completed_at < b->completed_at;
    });
    for (std::size_t k = 0; k + 1 < rs.size(); ++k) {
      LaggedChange c;
      c.learner_id = learner;
      c.session_id = rs[k]->session_id;
      c.next_session_id = rs[k + 1]->session_id;
      c.institution_id = rs[k]->institution_id;
      c.case_id = rs[k]->case_id;
      c.modality = rs[k]->modality;
      c.session_index = k + 1;
      c.reflection_char_length = static_cast<double>(rs[k]->reflection_char_length);
      c.turn_count = rs[k]->turn_count;
      c.duration_minutes = rs[k]->duration_minutes;
      c.mirs = rs[k]->mirs_overall;
      c.next_mirs = rs[k + 1]->mirs_overall;
      c.delta_mirs = c.next_mirs - c.mirs;
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace medsim::analytics
