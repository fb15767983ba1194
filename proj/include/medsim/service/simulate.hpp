#pragma once

#include <string>
#include <vector>

#include "medsim/assessment/pipeline.hpp"
#include "medsim/case/io.hpp"
#include "medsim/case/repository.hpp"
#include "medsim/llm/mock.hpp"
#include "medsim/session/engine.hpp"
#include "medsim/session/script.hpp"
#include "medsim/service/config.hpp"

namespace medsim::service {

struct SimulationResult {
  session::Session session;
  assessment::AssessmentReport report;
};

// Headless encounter: a scripted student against the mock patient on a
// simulated clock, then the full assessment. Nothing is persisted.
inline SimulationResult simulate_encounter(const session::EncounterScript& script,
                                           const std::vector<RubricFiles>& rubric_files,
                                           const llm::PatientScript& patient = {}) {
  if (script.case_path.empty()) throw Error("invalid_script", "script names no case file");
  cases::RubricRegistry rubrics;
  for (const auto& r : rubric_files) rubrics.add(cases::load_rubric(r.path, r.element_map));
  cases::CaseRepository repo({}, &rubrics);
  auto def = repo.publish(cases::load_case_file(script.case_path));
  ManualClock clock;
  llm::MockProvider mock(patient);
  session::SessionEngine engine(repo, mock, clock);
  auto s = engine.start_session(script.learner_id, {def->case_id, def->version}, script.modality);
  for (const auto& t : script.turns) {
    clock.advance(std::chrono::minutes(script.minutes_per_turn));
    try {
      engine.submit_turn(s.session_id, t);
    } catch (const Error& e) {
      if (e.code() != "time_expired" && e.code() != "session_not_active") throw;
      break;  // ran out of time
    }
  }
  auto done = engine.get(s.session_id);
  if (!done.terminal()) done = engine.complete_session(s.session_id);
  assessment::KeywordChecklistEvaluator keyword;
  assessment::AssessmentPipeline pipeline(rubrics, mock, keyword, clock);
  return {done, pipeline.assess(done, *def)};
}

}  // namespace medsim::service
