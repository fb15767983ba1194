#pragma once

#include <limits>
#include <optional>

#include "medsim/analytics/telemetry.hpp"
#include "medsim/session/session.hpp"

namespace medsim::session {

struct ScoredOutcome {
  double checklist_completion_pct = 0.0;
  double mirs_overall = std::numeric_limits<double>::quiet_NaN();
};

// Telemetry for a terminal session. Aborted sessions and sessions without an
// assessment are flagged excluded.
inline analytics::TelemetryRow telemetry_row(const Session& s, const std::optional<ScoredOutcome>& scored,
                                             std::size_t reflection_char_length) {
  if (!s.terminal()) throw Error("session_not_terminal", s.session_id + " is still active");
  analytics::TelemetryRow r;
  r.session_id = s.session_id;
  r.learner_id = s.learner_id;
  r.institution_id = s.institution_id;
  r.case_id = s.case_id;
  r.case_version = s.case_version;
  r.modality = s.modality;
  r.duration_minutes = s.duration_minutes();
  r.turn_count = s.turn_count();
  r.completed_at = *s.ended_at;
  r.reflection_char_length = reflection_char_length;
  r.excluded = s.state == SessionState::aborted || !scored;
  if (scored) {
    r.checklist_completion_pct = scored->checklist_completion_pct;
    r.mirs_overall = scored->mirs_overall;
  }
  return r;
}

}  // namespace medsim::session
