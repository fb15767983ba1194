#pragma once

#include <string>
#include <vector>

#include "medsim/assessment/report.hpp"
#include "medsim/core/text.hpp"
#include "medsim/core/transcript.hpp"

namespace medsim::assessment {

// Transcript text the quotes are checked against: utterances joined by line
// breaks, then case-folded with whitespace collapsed.
inline std::string normalized_transcript(const Transcript& t) {
  std::string joined;
  for (const auto& u : t) joined += u.content + "\n";
  return text::normalize_for_match(joined);
}

inline bool quote_grounded(const std::string& quote, const std::string& normalized_transcript) {
  auto q = text::normalize_for_match(quote);
  return !q.empty() && normalized_transcript.find(q) != std::string::npos;
}

// One violation per quote that is not a normalized substring of the
// transcript. Updates grounded flags and the report's violation list.
inline std::vector<GroundingViolation> verify_grounding(AssessmentReport& report, const Transcript& transcript) {
  const auto norm = normalized_transcript(transcript);
  std::vector<GroundingViolation> violations;
  for (auto& s : report.rubric_scores) {
    s.grounded = true;
    for (const auto& q : s.quotes)
      if (!quote_grounded(q, norm)) {
        s.grounded = false;
        violations.push_back({item_key(s), q});
      }
  }
  for (auto& c : report.checklist_results) {
    c.grounded = true;
    for (const auto& q : c.quotes)
      if (!quote_grounded(q, norm)) {
        c.grounded = false;
        violations.push_back({"checklist:" + c.item_id, q});
      }
  }
  report.grounding_violations = violations;
  return violations;
}

}  // namespace medsim::assessment
