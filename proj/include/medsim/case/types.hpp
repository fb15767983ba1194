#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medsim/core/error.hpp"

namespace medsim::cases {

inline constexpr int kCaseSchemaVersion = 1;
inline constexpr int kDefaultMaxDurationMinutes = 30;
inline constexpr const char* kDefaultPromptTemplate = "standard-patient-v1";

enum class VocabularyLevel { lay, mixed, technical };
enum class DisclosurePolicy { forthcoming, neutral, guarded };
enum class FindingStatus { present, absent, unknown };
enum class EmotionalLabel { calm, anxious, worried, distressed, irritable, sad, flat };

// The seven Kalamazoo essential elements used to aggregate rubric items.
inline const std::vector<std::string>& kalamazoo_elements() {
  static const std::vector<std::string> elements = {
      "build_relationship",      "open_discussion",   "gather_information",
      "understand_perspective",  "share_information", "reach_agreement",
      "provide_closure"};
  return elements;
}

inline bool is_kalamazoo_element(std::string_view id) {
  for (const auto& e : kalamazoo_elements())
    if (e == id) return true;
  return false;
}

struct Vital {
  std::string name;
  std::string value;
  std::string unit;
  bool operator==(const Vital&) const = default;
};

struct Fact {
  std::string fact_id;
  std::vector<std::string> topic_tags;  // lower-case keywords the mock patient matches
  std::string statement;
  bool elicit_only = false;
  bool operator==(const Fact&) const = default;
};

struct Demographics {
  std::string name;
  std::string age;
  std::string pronouns;
  std::string occupation;
  bool operator==(const Demographics&) const = default;
};

struct EmotionalState {
  EmotionalLabel label = EmotionalLabel::calm;
  std::string description;
  bool operator==(const EmotionalState&) const = default;
};

struct PatientProfile {
  Demographics demographics;
  std::string medical_history;
  std::string medications;
  std::string social_history;
  EmotionalState emotional_state;
  std::string communication_style;
  VocabularyLevel vocabulary_level = VocabularyLevel::lay;
  DisclosurePolicy volunteered_info_policy = DisclosurePolicy::neutral;
  std::vector<Fact> fact_table;
  bool operator==(const PatientProfile&) const = default;
};

struct ChecklistItem {
  std::string item_id;
  std::string prompt_text;
  bool required = true;
  FindingStatus finding_status = FindingStatus::unknown;
  std::optional<std::string> kalamazoo_element;
  std::vector<std::string> fact_ids;  // findings this item is about
  std::vector<std::string> cues;      // extra student-side keywords
  bool operator==(const ChecklistItem&) const = default;
};

struct GenerationSettings {
  double temperature = 0.7;
  int max_reply_length = 600;  // code points
  bool operator==(const GenerationSettings&) const = default;
};

struct CaseDefinition {
  std::string case_id;
  int version = 0;  // assigned by the repository on publish
  std::string title;
  std::string institution_id;
  PatientProfile patient_profile;
  std::vector<Vital> vitals;
  int duration_limit_minutes = kDefaultMaxDurationMinutes;
  std::string prompt_template_id = kDefaultPromptTemplate;
  std::vector<ChecklistItem> checklist;
  std::vector<std::string> rubric_ids;
  std::vector<std::string> tags;                     // matched against rubric applicability
  std::map<std::string, std::string> prompt_clauses; // overrides of default behaviour clauses
  GenerationSettings generation;
  bool operator==(const CaseDefinition&) const = default;

  const Fact* find_fact(std::string_view id) const {
    for (const auto& f : patient_profile.fact_table)
      if (f.fact_id == id) return &f;
    return nullptr;
  }
};

struct CaseRef {
  std::string case_id;
  int version = 0;  // 0 selects the latest published version
  bool operator==(const CaseRef&) const = default;
};

// ---- enum <-> text ----

template <class E>
struct EnumNames;

template <>
struct EnumNames<VocabularyLevel> {
  static constexpr const char* field = "vocabulary_level";
  static std::vector<std::pair<VocabularyLevel, const char*>> all() {
    return {{VocabularyLevel::lay, "lay"}, {VocabularyLevel::mixed, "mixed"},
            {VocabularyLevel::technical, "technical"}};
  }
};
template <>
struct EnumNames<DisclosurePolicy> {
  static constexpr const char* field = "volunteered_info_policy";
  static std::vector<std::pair<DisclosurePolicy, const char*>> all() {
    return {{DisclosurePolicy::forthcoming, "forthcoming"},
            {DisclosurePolicy::neutral, "neutral"},
            {DisclosurePolicy::guarded, "guarded"}};
  }
};
template <>
struct EnumNames<FindingStatus> {
  static constexpr const char* field = "finding_status";
  static std::vector<std::pair<FindingStatus, const char*>> all() {
    return {{FindingStatus::present, "present"}, {FindingStatus::absent, "absent"},
            {FindingStatus::unknown, "unknown"}};
  }
};
template <>
struct EnumNames<EmotionalLabel> {
  static constexpr const char* field = "emotional_state.label";
  static std::vector<std::pair<EmotionalLabel, const char*>> all() {
    return {{EmotionalLabel::calm, "calm"},           {EmotionalLabel::anxious, "anxious"},
            {EmotionalLabel::worried, "worried"},     {EmotionalLabel::distressed, "distressed"},
            {EmotionalLabel::irritable, "irritable"}, {EmotionalLabel::sad, "sad"},
            {EmotionalLabel::flat, "flat"}};
  }
};

template <class E>
std::string to_string(E value) {
  for (const auto& [v, name] : EnumNames<E>::all())
    if (v == value) return name;
  return "?";
}

template <class E>
E parse_enum(std::string_view text) {
  for (const auto& [v, name] : EnumNames<E>::all())
    if (text == name) return v;
  std::string allowed;
  for (const auto& [v, name] : EnumNames<E>::all()) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  throw Error("invalid_case_file", std::string(EnumNames<E>::field) + ": '" + std::string(text) +
                                       "' is not one of " + allowed);
}

}  // namespace medsim::cases
