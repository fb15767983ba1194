#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medsim/core/error.hpp"
#include "medsim/core/time.hpp"

namespace medsim::assessment {

inline constexpr int kReportSchemaVersion = 1;

enum class ElicitedStatus { present, absent, unknown, not_assessed };

inline std::string to_string(ElicitedStatus s) {
  switch (s) {
    case ElicitedStatus::present: return "present";
    case ElicitedStatus::absent: return "absent";
    case ElicitedStatus::unknown: return "unknown";
    case ElicitedStatus::not_assessed: return "not_assessed";
  }
  return "?";
}

inline ElicitedStatus parse_elicited(const std::string& s) {
  if (s == "present") return ElicitedStatus::present;
  if (s == "absent") return ElicitedStatus::absent;
  if (s == "unknown") return ElicitedStatus::unknown;
  if (s == "not_assessed") return ElicitedStatus::not_assessed;
  throw Error("invalid_argument", "unknown elicited status '" + s + "'");
}

struct ItemScore {
  std::string rubric_id;
  std::string item_id;
  std::optional<int> score;  // empty when not applicable or failed
  bool not_applicable = false;
  bool failed = false;
  std::string justification;
  std::vector<std::string> quotes;
  bool grounded = true;
  std::vector<std::string> diagnostics;
  bool operator==(const ItemScore&) const = default;
};

struct ChecklistResult {
  std::string item_id;
  bool required = true;
  bool assessed = false;
  ElicitedStatus elicited_status = ElicitedStatus::not_assessed;
  std::vector<std::string> quotes;
  bool failed = false;
  bool grounded = true;
  bool operator==(const ChecklistResult&) const = default;
};

struct GroundingViolation {
  std::string item_id;  // "MIRS:MIRS03" or "checklist:CL01"
  std::string quote;
  bool operator==(const GroundingViolation&) const = default;
};

struct AssessmentReport {
  int schema_version = kReportSchemaVersion;
  std::string session_id;
  std::string case_id;
  int case_version = 0;
  std::vector<ItemScore> rubric_scores;
  std::vector<ChecklistResult> checklist_results;
  double checklist_completion_pct = 0.0;
  std::optional<double> mirs_overall;
  std::map<std::string, double> element_aggregates;
  TimePoint generated_at{};
  std::int64_t generation_latency_ms = 0;
  std::vector<std::string> failed_items;
  bool complete = true;
  std::vector<GroundingViolation> grounding_violations;
  std::string transcript_hash;
  bool operator==(const AssessmentReport&) const = default;
};

inline std::string item_key(const ItemScore& s) { return s.rubric_id + ":" + s.item_id; }

// ---- aggregates ----

// 100 x assessed required items / required items; 0 when nothing is required.
inline double checklist_completion(const std::vector<ChecklistResult>& results, bool exclude_failed = false) {
  int required = 0, assessed = 0;
  for (const auto& r : results) {
    if (!r.required || (exclude_failed && r.failed)) continue;
    ++required;
    assessed += r.assessed;
  }
  return required == 0 ? 0.0 : 100.0 * assessed / required;
}

// Arithmetic mean of scored (non-N/A, non-failed) items of one rubric.
inline std::optional<double> rubric_mean(const std::vector<ItemScore>& scores, const std::string& rubric_id) {
  double sum = 0.0;
  int n = 0;
  for (const auto& s : scores)
    if (s.rubric_id == rubric_id && s.score) {
      sum += *s.score;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// Per-element mean over mapped, scored items; elements without any are omitted.
inline std::map<std::string, double> aggregate_elements(const std::vector<ItemScore>& scores,
                                                        const std::map<std::string, std::string>& element_map) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& s : scores) {
    if (!s.score) continue;
    auto it = element_map.find(s.item_id);
    if (it == element_map.end()) continue;
    acc[it->second].first += *s.score;
    acc[it->second].second += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [element, sn] : acc) out[element] = sn.first / sn.second;
  return out;
}

// ---- JSON ----

inline nlohmann::json to_json(const AssessmentReport& r) {
  using nlohmann::json;
  json scores = json::array();
  for (const auto& s : r.rubric_scores)
    scores.push_back({{"rubric_id", s.rubric_id},
                      {"item_id", s.item_id},
                      {"score", s.not_applicable ? json("N/A") : s.score ? json(*s.score) : json()},
                      {"failed", s.failed},
                      {"justification", s.justification},
                      {"quotes", s.quotes},
                      {"grounded", s.grounded},
                      {"diagnostics", s.diagnostics}});
  json checklist = json::array();
  for (const auto& c : r.checklist_results)
    checklist.push_back({{"item_id", c.item_id},
                         {"required", c.required},
                         {"assessed", c.assessed},
                         {"elicited_status", to_string(c.elicited_status)},
                         {"quotes", c.quotes},
                         {"failed", c.failed},
                         {"grounded", c.grounded}});
  json violations = json::array();
  for (const auto& v : r.grounding_violations) violations.push_back({{"item", v.item_id}, {"quote", v.quote}});
  return {{"schema_version", r.schema_version},
          {"session_id", r.session_id},
          {"case_id", r.case_id},
          {"case_version", r.case_version},
          {"rubric_scores", scores},
          {"checklist_results", checklist},
          {"checklist_completion_pct", r.checklist_completion_pct},
          {"mirs_overall", r.mirs_overall ? json(*r.mirs_overall) : json()},
          {"element_aggregates", r.element_aggregates},
          {"generated_at", format_rfc3339(r.generated_at)},
          {"generation_latency_ms", r.generation_latency_ms},
          {"failed_items", r.failed_items},
          {"complete", r.complete},
          {"grounding_violations", violations},
          {"transcript_hash", r.transcript_hash}};
}

inline AssessmentReport report_from_json(const nlohmann::json& j) {
  AssessmentReport r;
  r.schema_version = j.at("schema_version");
  if (r.schema_version != kReportSchemaVersion)
    throw Error("invalid_report", "unsupported report schema_version " + std::to_string(r.schema_version));
  r.session_id = j.at("session_id");
  r.case_id = j.at("case_id");
  r.case_version = j.at("case_version");
  for (const auto& s : j.at("rubric_scores")) {
    ItemScore is;
    is.rubric_id = s.at("rubric_id");
    is.item_id = s.at("item_id");
    if (s.at("score").is_string()) is.not_applicable = true;
    else if (s.at("score").is_number_integer()) is.score = s.at("score").get<int>();
    is.failed = s.at("failed");
    is.justification = s.at("justification");
    is.quotes = s.at("quotes").get<std::vector<std::string>>();
    is.grounded = s.at("grounded");
    is.diagnostics = s.at("diagnostics").get<std::vector<std::string>>();
    r.rubric_scores.push_back(std::move(is));
  }
  for (const auto& c : j.at("checklist_results")) {
    ChecklistResult cr;
    cr.item_id = c.at("item_id");
    cr.required = c.at("required");
    cr.assessed = c.at("assessed");
    cr.elicited_status = parse_elicited(c.at("elicited_status"));
    cr.quotes = c.at("quotes").get<std::vector<std::string>>();
    cr.failed = c.at("failed");
    cr.grounded = c.at("grounded");
    r.checklist_results.push_back(std::move(cr));
  }
  r.checklist_completion_pct = j.at("checklist_completion_pct");
  if (!j.at("mirs_overall").is_null()) r.mirs_overall = j.at("mirs_overall").get<double>();
  r.element_aggregates = j.at("element_aggregates").get<std::map<std::string, double>>();
  r.generated_at = parse_rfc3339(j.at("generated_at").get<std::string>());
  r.generation_latency_ms = j.at("generation_latency_ms");
  r.failed_items = j.at("failed_items").get<std::vector<std::string>>();
  r.complete = j.at("complete");
  for (const auto& v : j.at("grounding_violations")) r.grounding_violations.push_back({v.at("item"), v.at("quote")});
  r.transcript_hash = j.value("transcript_hash", "");
  return r;
}

}  // namespace medsim::assessment
