#pragma once

#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "medsim/case/clauses.hpp"
#include "medsim/case/rubric.hpp"
#include "medsim/case/types.hpp"
#include "medsim/case/validate.hpp"
#include "medsim/core/text.hpp"
#include "medsim/core/transcript.hpp"

namespace medsim::cases {

inline constexpr const char* kFactTableHeader = "## Fact table";
inline constexpr const char* kDisclosurePrefix = "Disclosure policy: ";
inline constexpr const char* kScoringTaskMarker = "TASK: rubric-item-scoring";
inline constexpr const char* kCriteriaBegin = "=== ANCHORED CRITERIA ===";
inline constexpr const char* kCriteriaEnd = "=== END ANCHORED CRITERIA ===";
inline constexpr const char* kTranscriptBegin = "=== TRANSCRIPT ===";
inline constexpr const char* kTranscriptEnd = "=== END TRANSCRIPT ===";

namespace detail {
inline std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return text::trim(s);
}
inline std::string or_unstated(const std::string& s) { return s.empty() ? "not stated" : one_line(s); }
}  // namespace detail

// Pure function of the case: same definition gives byte-identical text.
inline std::string render_patient_prompt(const CaseDefinition& c, const ValidationLimits& limits = {}) {
  require_valid(c, limits);
  using detail::or_unstated;
  const auto& p = c.patient_profile;
  std::ostringstream o;
  o << "You are playing a standardized patient in a clinical interview simulation for medical students.\n"
    << "Case: " << detail::one_line(c.title) << " (" << c.case_id << " v" << c.version << ")\n\n";
  o << "## Identity\n"
    << "Name: " << or_unstated(p.demographics.name) << "\n"
    << "Age: " << or_unstated(p.demographics.age) << "\n"
    << "Pronouns: " << or_unstated(p.demographics.pronouns) << "\n"
    << "Occupation: " << or_unstated(p.demographics.occupation) << "\n\n";
  o << "## Background\n"
    << "Medical history: " << or_unstated(p.medical_history) << "\n"
    << "Medications: " << or_unstated(p.medications) << "\n"
    << "Social history: " << or_unstated(p.social_history) << "\n"
    << "Emotional state: " << to_string(p.emotional_state.label);
  if (!p.emotional_state.description.empty()) o << " - " << detail::one_line(p.emotional_state.description);
  o << "\n"
    << "Communication style: " << or_unstated(p.communication_style) << "\n\n";
  if (!c.vitals.empty()) {
    o << "## Vital signs\n";
    for (const auto& v : c.vitals) {
      o << "- " << v.name << ": " << v.value;
      if (!v.unit.empty()) o << " " << v.unit;
      o << "\n";
    }
    o << "\n";
  }
  o << kFactTableHeader << "\n"
    << kDisclosurePrefix << to_string(p.volunteered_info_policy) << "\n";
  for (const auto& f : p.fact_table)
    o << "- [" << f.fact_id << "] tags: " << text::join(f.topic_tags, "; ")
      << " | elicit-only: " << (f.elicit_only ? "yes" : "no") << " | " << detail::one_line(f.statement) << "\n";
  o << "\n## Behaviour\n";
  for (const auto& id : clause_ids()) {
    if (id == "refusal") continue;
    o << "- " << detail::one_line(resolve_clause(c, id)) << "\n";
  }
  o << "\n## Out-of-character requests\n" << detail::one_line(resolve_clause(c, "refusal")) << "\n";
  return o.str();
}

// Policy line under the fact table header; neutral when absent.
inline DisclosurePolicy parse_disclosure_policy(const std::string& prompt) {
  auto pos = prompt.find(std::string("\n") + kDisclosurePrefix);
  if (pos == std::string::npos) return DisclosurePolicy::neutral;
  pos += 1 + std::string(kDisclosurePrefix).size();
  auto end = prompt.find('\n', pos);
  return parse_enum<DisclosurePolicy>(prompt.substr(pos, end - pos));
}

struct PromptFact {
  std::string fact_id;
  std::vector<std::string> tags;
  bool elicit_only = false;
  std::string statement;
};

// Recovers the fact table from a rendered patient prompt.
inline std::vector<PromptFact> parse_fact_table(const std::string& prompt) {
  static const std::regex line_re(R"(^- \[([^\]]+)\] tags: (.*) \| elicit-only: (yes|no) \| (.*)$)");
  std::vector<PromptFact> facts;
  std::istringstream in(prompt);
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line == kFactTableHeader) {
      inside = true;
      continue;
    }
    if (!inside) continue;
    if (line.empty() || text::starts_with(line, "## ")) break;
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    PromptFact f;
    f.fact_id = m[1];
    for (auto& t : text::split(m[2].str(), ';')) {
      auto tag = text::trim(t);
      if (!tag.empty()) f.tags.push_back(text::to_lower(tag));
    }
    f.elicit_only = m[3] == "yes";
    f.statement = m[4];
    facts.push_back(std::move(f));
  }
  return facts;
}

inline std::string render_criteria_block(const RubricDefinition& rubric, const RubricItem& item) {
  std::ostringstream o;
  o << kCriteriaBegin << "\n"
    << "Rubric: " << rubric.rubric_id << "\n"
    << "Item: " << item.item_id << " - " << detail::one_line(item.title) << "\n";
  for (int s = rubric.scale_min; s <= rubric.scale_max; ++s) {
    auto it = item.anchors.find(s);
    o << "Score " << s << ": " << (it == item.anchors.end() ? "" : detail::one_line(it->second)) << "\n";
  }
  o << kCriteriaEnd << "\n";
  return o.str();
}

inline std::string render_item_scoring_prompt(const RubricDefinition& rubric, const std::string& item_id,
                                              const Transcript& transcript) {
  const auto* item = rubric.find_item(item_id);
  if (!item) throw Error("unknown_item", "rubric " + rubric.rubric_id + " has no item " + item_id);
  if (transcript.empty()) throw Error("empty_transcript", "cannot score an empty transcript");
  std::ostringstream o;
  o << kScoringTaskMarker << "\n"
    << "You are rating a medical student's interview with a standardized patient.\n"
    << "Rate exactly one rubric item, using only the anchored criteria below.\n\n"
    << render_criteria_block(rubric, *item) << "\n"
    << kTranscriptBegin << "\n"
    << render_transcript(transcript) << kTranscriptEnd << "\n\n"
    << "Reply with one JSON object:\n"
    << R"({"score": <integer )" << rubric.scale_min << "-" << rubric.scale_max
    << R"( or "N/A">, "justification": "<one or two sentences>", "quotes": ["<verbatim excerpt>", ...]})" << "\n"
    << "Copy every quote verbatim from a single transcript line, without the [n] ROLE: prefix. "
       "Use \"N/A\" only when the item cannot apply to this encounter.\n";
  return o.str();
}

struct ParsedScoringPrompt {
  std::string rubric_id;
  std::string item_id;
  std::string item_title;
  std::map<int, std::string> anchors;
  Transcript transcript;
};

// Inverse of render_item_scoring_prompt; nullopt if the text is not a scoring prompt.
inline std::optional<ParsedScoringPrompt> parse_scoring_prompt(const std::string& prompt) {
  if (!text::starts_with(prompt, kScoringTaskMarker)) return std::nullopt;
  static const std::regex item_re(R"(^Item: (\S+) - (.*)$)");
  static const std::regex score_re(R"(^Score (\d+): (.*)$)");
  static const std::regex line_re(R"(^\[\d+\] (STUDENT|PATIENT|SYSTEM): (.*)$)");
  ParsedScoringPrompt out;
  std::istringstream in(prompt);
  std::string line;
  enum { none, criteria, transcript } section = none;
  while (std::getline(in, line)) {
    if (line == kCriteriaBegin) section = criteria;
    else if (line == kTranscriptBegin) section = transcript;
    else if (line == kCriteriaEnd || line == kTranscriptEnd) section = none;
    else if (section == criteria) {
      std::smatch m;
      if (text::starts_with(line, "Rubric: ")) out.rubric_id = line.substr(8);
      else if (std::regex_match(line, m, item_re)) {
        out.item_id = m[1];
        out.item_title = m[2];
      } else if (std::regex_match(line, m, score_re)) {
        out.anchors[std::stoi(m[1])] = m[2];
      }
    } else if (section == transcript) {
      std::smatch m;
      if (std::regex_match(line, m, line_re))
        out.transcript.push_back({m[1] == "STUDENT" ? Role::student : m[1] == "PATIENT" ? Role::patient : Role::system,
                                  m[2]});
    }
  }
  if (out.item_id.empty()) return std::nullopt;
  return out;
}

}  // namespace medsim::cases
