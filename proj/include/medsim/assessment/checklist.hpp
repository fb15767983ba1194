#pragma once

#include <set>
#include <string>
#include <vector>

#include "medsim/assessment/report.hpp"
#include "medsim/case/types.hpp"
#include "medsim/core/text.hpp"
#include "medsim/core/transcript.hpp"
#include "medsim/llm/provider.hpp"
#include "medsim/llm/structured.hpp"

namespace medsim::assessment {

class ChecklistEvaluator {
 public:
  virtual ~ChecklistEvaluator() = default;
  virtual ChecklistResult evaluate(const cases::ChecklistItem& item, const cases::CaseDefinition& def,
                                   const Transcript& transcript) = 0;
};

namespace detail {
inline ChecklistResult not_assessed(const cases::ChecklistItem& item) {
  ChecklistResult r;
  r.item_id = item.item_id;
  r.required = item.required;
  return r;
}

inline cases::FindingStatus to_finding(ElicitedStatus s) {
  return s == ElicitedStatus::present  ? cases::FindingStatus::present
         : s == ElicitedStatus::absent ? cases::FindingStatus::absent
                                       : cases::FindingStatus::unknown;
}

inline ElicitedStatus to_elicited(cases::FindingStatus s) {
  return s == cases::FindingStatus::present  ? ElicitedStatus::present
         : s == cases::FindingStatus::absent ? ElicitedStatus::absent
                                             : ElicitedStatus::unknown;
}
}  // namespace detail

// The item counts as assessed when a student utterance contains one of its
// cues or a topic tag of a fact it references. The elicited status is the
// case's finding status when the following patient reply states one of those
// facts, otherwise unknown (e.g. "I don't know").
inline ChecklistResult evaluate_checklist_item(const cases::ChecklistItem& item, const cases::CaseDefinition& def,
                                               const Transcript& transcript) {
  std::vector<std::string> terms = item.cues;
  std::vector<std::string> statements;
  for (const auto& id : item.fact_ids)
    if (const auto* f = def.find_fact(id)) {
      terms.insert(terms.end(), f->topic_tags.begin(), f->topic_tags.end());
      statements.push_back(text::normalize_for_match(f->statement));
    }
  auto result = detail::not_assessed(item);
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    if (transcript[i].role != Role::student) continue;
    auto asked = text::normalize_for_match(transcript[i].content);
    bool hit = false;
    for (const auto& t : terms) hit = hit || text::contains_word(asked, text::normalize_for_match(t));
    if (!hit) continue;
    const Utterance* reply = i + 1 < transcript.size() && transcript[i + 1].role == Role::patient ? &transcript[i + 1] : nullptr;
    bool stated = false;
    if (reply) {
      auto answered = text::normalize_for_match(reply->content);
      for (const auto& s : statements) stated = stated || answered.find(s) != std::string::npos;
    }
    if (!result.assessed || stated) {
      result.assessed = true;
      result.elicited_status = stated ? detail::to_elicited(item.finding_status) : ElicitedStatus::unknown;
      result.quotes = {transcript[i].content};
      if (reply) result.quotes.push_back(reply->content);
    }
    if (stated) break;
  }
  return result;
}

class KeywordChecklistEvaluator : public ChecklistEvaluator {
 public:
  ChecklistResult evaluate(const cases::ChecklistItem& item, const cases::CaseDefinition& def,
                           const Transcript& transcript) override {
    return evaluate_checklist_item(item, def, transcript);
  }
};

inline constexpr const char* kChecklistTaskMarker = "TASK: checklist-item-evaluation";

inline std::string render_checklist_prompt(const cases::ChecklistItem& item, const Transcript& transcript) {
  std::string p = std::string(kChecklistTaskMarker) + "\n" +
                  "Decide whether the student assessed the following history item during the interview.\n\n" +
                  "Item " + item.item_id + ": " + item.prompt_text + "\n\n=== TRANSCRIPT ===\n" +
                  render_transcript(transcript) + "=== END TRANSCRIPT ===\n\n" +
                  "Reply with one JSON object:\n"
                  "{\"assessed\": true|false, \"status\": \"present\"|\"absent\"|\"unknown\", "
                  "\"quotes\": [\"<verbatim excerpt>\", ...]}\n"
                  "Use status \"unknown\" when the patient could not answer.\n";
  return p;
}

// Model-backed evaluator. Replies that never parse mark the item failed.
class ProviderChecklistEvaluator : public ChecklistEvaluator {
 public:
  ProviderChecklistEvaluator(llm::ChatProvider& provider, int parse_retries = 2)
      : provider_(provider), retries_(parse_retries) {}

  ChecklistResult evaluate(const cases::ChecklistItem& item, const cases::CaseDefinition&,
                           const Transcript& transcript) override {
    auto result = detail::not_assessed(item);
    if (transcript.empty()) return result;
    llm::ChatExchange ex;
    ex.system_prompt = render_checklist_prompt(item, transcript);
    ex.params = {0.0, 2000};
    for (int attempt = 0; attempt <= retries_; ++attempt) {
      std::string content;
      try {
        content = provider_.complete(ex).content;
      } catch (const llm::ProviderError&) {
        break;
      }
      auto j = llm::extract_first_json_object(content);
      if (!j || !j->contains("assessed") || !(*j)["assessed"].is_boolean()) continue;
      bool assessed = (*j)["assessed"].get<bool>();
      ElicitedStatus status = ElicitedStatus::not_assessed;
      if (assessed) {
        if (!j->contains("status") || !(*j)["status"].is_string()) continue;
        auto s = (*j)["status"].get<std::string>();
        if (s != "present" && s != "absent" && s != "unknown") continue;
        status = parse_elicited(s);
      }
      std::vector<std::string> quotes;
      if (j->contains("quotes") && (*j)["quotes"].is_array())
        for (const auto& q : (*j)["quotes"])
          if (q.is_string()) quotes.push_back(q.get<std::string>());
      result.assessed = assessed;
      result.elicited_status = status;
      result.quotes = std::move(quotes);
      return result;
    }
    result.failed = true;
    return result;
  }

 private:
  llm::ChatProvider& provider_;
  int retries_;
};

}  // namespace medsim::assessment
