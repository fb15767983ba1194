#pragma once

#include <set>
#include <string>
#include <vector>

#include "medsim/case/clauses.hpp"
#include "medsim/case/rubric.hpp"
#include "medsim/case/types.hpp"
#include "medsim/core/text.hpp"

namespace medsim::cases {

struct Violation {
  std::string code;
  std::string message;
  bool operator==(const Violation&) const = default;
};

struct ValidationOutcome {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(const std::string& code) const {
    for (const auto& v : violations)
      if (v.code == code) return true;
    return false;
  }
};

struct ValidationLimits {
  int max_duration_minutes = kDefaultMaxDurationMinutes;
};

// Reports every violation; never throws. Rubric ids are checked only when a
// registry is supplied.
inline ValidationOutcome validate_case(const CaseDefinition& c, const ValidationLimits& limits = {},
                                       const RubricRegistry* rubrics = nullptr) {
  ValidationOutcome out;
  auto add = [&](std::string code, std::string msg) { out.violations.push_back({std::move(code), std::move(msg)}); };

  if (c.case_id.empty()) add("missing_case_id", "case_id is empty");
  if (c.title.empty()) add("missing_title", "title is empty");
  if (c.duration_limit_minutes < 1 || c.duration_limit_minutes > limits.max_duration_minutes)
    add("duration_limit_out_of_range", "duration_limit_minutes=" + std::to_string(c.duration_limit_minutes) +
                                           " must be in [1, " + std::to_string(limits.max_duration_minutes) + "]");
  if (c.rubric_ids.empty() && c.checklist.empty())
    add("no_assessment_attached", "attach at least one rubric or checklist item");

  std::set<std::string> fact_ids;
  for (const auto& f : c.patient_profile.fact_table) {
    if (!fact_ids.insert(f.fact_id).second) add("duplicate_fact_id", "fact id " + f.fact_id + " repeated");
    if (text::trim(f.statement).empty()) add("empty_fact_statement", "fact " + f.fact_id + " has no statement");
    if (f.statement.find('\n') != std::string::npos)
      add("multiline_fact_statement", "fact " + f.fact_id + " statement must be a single line");
    if (f.topic_tags.empty()) add("fact_without_tags", "fact " + f.fact_id + " has no topic tags");
    for (const auto& t : f.topic_tags)
      if (t.find_first_of(";|\n") != std::string::npos || text::trim(t).empty())
        add("invalid_fact_tag", "fact " + f.fact_id + " tag '" + t + "' is empty or contains ; or |");
  }

  std::set<std::string> item_ids;
  bool any_required = false;
  for (const auto& it : c.checklist) {
    if (!item_ids.insert(it.item_id).second)
      add("duplicate_checklist_item", "checklist item id " + it.item_id + " repeated");
    any_required = any_required || it.required;
    if (it.finding_status != FindingStatus::unknown) {
      bool resolved = false;
      for (const auto& id : it.fact_ids) resolved = resolved || fact_ids.count(id) > 0;
      if (!resolved)
        add("unresolvable_finding", "checklist item " + it.item_id + " has status " +
                                        to_string(it.finding_status) + " but references no known fact");
    }
    for (const auto& id : it.fact_ids)
      if (!fact_ids.count(id))
        add("unknown_fact_reference", "checklist item " + it.item_id + " references missing fact " + id);
    if (it.kalamazoo_element && !is_kalamazoo_element(*it.kalamazoo_element))
      add("unknown_kalamazoo_element", "checklist item " + it.item_id + ": " + *it.kalamazoo_element);
  }
  if (!c.checklist.empty() && !any_required)
    add("no_required_checklist_item", "a non-empty checklist needs at least one required item");

  if (rubrics)
    for (const auto& r : c.rubric_ids)
      if (!rubrics->contains(r)) add("unknown_rubric", "rubric " + r + " is not registered");

  if (!is_known_template(c.prompt_template_id))
    add("unknown_prompt_template", "prompt template " + c.prompt_template_id + " is not available");
  for (const auto& [key, value] : c.prompt_clauses) {
    if (!is_clause_id(key)) add("unknown_prompt_clause", "prompt clause " + key + " does not exist");
    else if (text::trim(value).empty()) add("empty_prompt_clause", "prompt clause " + key + " is empty");
  }
  if (c.generation.temperature < 0.0 || c.generation.temperature > 2.0)
    add("generation_out_of_range", "temperature must be in [0, 2]");
  if (c.generation.max_reply_length < 1) add("generation_out_of_range", "max_reply_length must be positive");
  return out;
}

inline void require_valid(const CaseDefinition& c, const ValidationLimits& limits = {},
                          const RubricRegistry* rubrics = nullptr) {
  auto v = validate_case(c, limits, rubrics);
  if (!v.ok()) throw Error("invalid_case", v.violations.front().code + ": " + v.violations.front().message);
}

}  // namespace medsim::cases
