#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "medsim/case/types.hpp"
#include "medsim/core/error.hpp"
#include "medsim/core/text.hpp"

namespace medsim::cases {

namespace detail {

inline std::string path_of(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline std::string req_string(const YAML::Node& n, const std::string& key, const std::string& where) {
  if (!n[key] || n[key].IsNull())
    throw Error("invalid_case_file", path_of(where, key) + ": required field missing");
  if (!n[key].IsScalar()) throw Error("invalid_case_file", path_of(where, key) + ": expected text");
  return n[key].as<std::string>();
}

inline std::string opt_string(const YAML::Node& n, const std::string& key, const std::string& where,
                              std::string fallback = {}) {
  if (!n[key] || n[key].IsNull()) return fallback;
  if (!n[key].IsScalar()) throw Error("invalid_case_file", path_of(where, key) + ": expected text");
  return n[key].as<std::string>();
}

template <class T>
T opt_scalar(const YAML::Node& n, const std::string& key, const std::string& where, T fallback) {
  if (!n[key] || n[key].IsNull()) return fallback;
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception&) {
    throw Error("invalid_case_file", path_of(where, key) + ": wrong type");
  }
}

inline std::vector<std::string> opt_strings(const YAML::Node& n, const std::string& key,
                                            const std::string& where) {
  std::vector<std::string> out;
  if (!n[key] || n[key].IsNull()) return out;
  if (!n[key].IsSequence()) throw Error("invalid_case_file", path_of(where, key) + ": expected a list");
  for (const auto& v : n[key]) out.push_back(v.as<std::string>());
  return out;
}

inline YAML::Node seq(const YAML::Node& n, const std::string& key, const std::string& where) {
  if (!n[key] || n[key].IsNull()) return YAML::Node(YAML::NodeType::Sequence);
  if (!n[key].IsSequence()) throw Error("invalid_case_file", path_of(where, key) + ": expected a list");
  return n[key];
}

}  // namespace detail

// Accepts YAML and, since it is a subset, JSON documents.
inline CaseDefinition case_from_node(const YAML::Node& root) {
  using namespace detail;
  if (!root.IsMap()) throw Error("invalid_case_file", "document root must be a mapping");
  int schema = opt_scalar<int>(root, "schema_version", "", kCaseSchemaVersion);
  if (schema != kCaseSchemaVersion)
    throw Error("invalid_case_file", "schema_version " + std::to_string(schema) + " is not supported");

  CaseDefinition c;
  c.case_id = req_string(root, "case_id", "");
  c.version = opt_scalar<int>(root, "version", "", 0);
  c.title = req_string(root, "title", "");
  c.institution_id = opt_string(root, "institution_id", "");
  c.duration_limit_minutes = opt_scalar<int>(root, "duration_limit_minutes", "", kDefaultMaxDurationMinutes);
  c.prompt_template_id = opt_string(root, "prompt_template_id", "", kDefaultPromptTemplate);
  c.rubric_ids = opt_strings(root, "rubrics", "");
  c.tags = opt_strings(root, "tags", "");

  if (auto g = root["generation"]) {
    c.generation.temperature = opt_scalar<double>(g, "temperature", "generation", c.generation.temperature);
    c.generation.max_reply_length =
        opt_scalar<int>(g, "max_reply_length", "generation", c.generation.max_reply_length);
  }
  if (auto pc = root["prompt_clauses"]) {
    if (!pc.IsMap()) throw Error("invalid_case_file", "prompt_clauses: expected a mapping");
    for (const auto& kv : pc) c.prompt_clauses[kv.first.as<std::string>()] = kv.second.as<std::string>();
  }

  if (!root["patient"] || !root["patient"].IsMap())
    throw Error("invalid_case_file", "patient: required mapping missing");
  const auto p = root["patient"];
  auto& pp = c.patient_profile;
  if (auto d = p["demographics"]) {
    pp.demographics.name = opt_string(d, "name", "patient.demographics");
    pp.demographics.age = opt_string(d, "age", "patient.demographics");
    pp.demographics.pronouns = opt_string(d, "pronouns", "patient.demographics");
    pp.demographics.occupation = opt_string(d, "occupation", "patient.demographics");
  }
  pp.medical_history = opt_string(p, "medical_history", "patient");
  pp.medications = opt_string(p, "medications", "patient");
  pp.social_history = opt_string(p, "social_history", "patient");
  if (auto e = p["emotional_state"]) {
    pp.emotional_state.label = parse_enum<EmotionalLabel>(opt_string(e, "label", "patient.emotional_state", "calm"));
    pp.emotional_state.description = opt_string(e, "description", "patient.emotional_state");
  }
  pp.communication_style = opt_string(p, "communication_style", "patient");
  pp.vocabulary_level = parse_enum<VocabularyLevel>(opt_string(p, "vocabulary_level", "patient", "lay"));
  pp.volunteered_info_policy =
      parse_enum<DisclosurePolicy>(opt_string(p, "volunteered_info_policy", "patient", "neutral"));
  std::size_t i = 0;
  for (const auto& f : seq(p, "facts", "patient")) {
    std::string where = "patient.facts[" + std::to_string(i++) + "]";
    Fact fact;
    fact.fact_id = req_string(f, "id", where);
    fact.topic_tags = opt_strings(f, "tags", where);
    for (auto& t : fact.topic_tags) t = text::to_lower(text::trim(t));
    fact.statement = req_string(f, "statement", where);
    fact.elicit_only = opt_scalar<bool>(f, "elicit_only", where, false);
    pp.fact_table.push_back(std::move(fact));
  }

  i = 0;
  for (const auto& v : seq(root, "vitals", "")) {
    std::string where = "vitals[" + std::to_string(i++) + "]";
    c.vitals.push_back({req_string(v, "name", where), req_string(v, "value", where), opt_string(v, "unit", where)});
  }
  i = 0;
  for (const auto& n : seq(root, "checklist", "")) {
    std::string where = "checklist[" + std::to_string(i++) + "]";
    ChecklistItem item;
    item.item_id = req_string(n, "id", where);
    item.prompt_text = req_string(n, "prompt", where);
    item.required = opt_scalar<bool>(n, "required", where, true);
    item.finding_status = parse_enum<FindingStatus>(opt_string(n, "finding_status", where, "unknown"));
    if (n["kalamazoo_element"] && !n["kalamazoo_element"].IsNull())
      item.kalamazoo_element = n["kalamazoo_element"].as<std::string>();
    item.fact_ids = opt_strings(n, "facts", where);
    item.cues = opt_strings(n, "cues", where);
    for (auto& cue : item.cues) cue = text::to_lower(text::trim(cue));
    c.checklist.push_back(std::move(item));
  }
  return c;
}

inline CaseDefinition parse_case(const std::string& text) {
  try {
    return case_from_node(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw Error("invalid_case_file", std::string("syntax: ") + e.what());
  }
}

inline CaseDefinition load_case_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot read case file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

inline nlohmann::json to_json(const CaseDefinition& c) {
  using nlohmann::json;
  const auto& pp = c.patient_profile;
  json facts = json::array();
  for (const auto& f : pp.fact_table)
    facts.push_back({{"id", f.fact_id}, {"tags", f.topic_tags}, {"statement", f.statement},
                     {"elicit_only", f.elicit_only}});
  json vitals = json::array();
  for (const auto& v : c.vitals) vitals.push_back({{"name", v.name}, {"value", v.value}, {"unit", v.unit}});
  json checklist = json::array();
  for (const auto& it : c.checklist) {
    json j = {{"id", it.item_id},
              {"prompt", it.prompt_text},
              {"required", it.required},
              {"finding_status", to_string(it.finding_status)},
              {"facts", it.fact_ids},
              {"cues", it.cues}};
    if (it.kalamazoo_element) j["kalamazoo_element"] = *it.kalamazoo_element;
    checklist.push_back(std::move(j));
  }
  return json{
      {"schema_version", kCaseSchemaVersion},
      {"case_id", c.case_id},
      {"version", c.version},
      {"title", c.title},
      {"institution_id", c.institution_id},
      {"duration_limit_minutes", c.duration_limit_minutes},
      {"prompt_template_id", c.prompt_template_id},
      {"rubrics", c.rubric_ids},
      {"tags", c.tags},
      {"generation",
       {{"temperature", c.generation.temperature}, {"max_reply_length", c.generation.max_reply_length}}},
      {"prompt_clauses", c.prompt_clauses},
      {"patient",
       {{"demographics",
         {{"name", pp.demographics.name},
          {"age", pp.demographics.age},
          {"pronouns", pp.demographics.pronouns},
          {"occupation", pp.demographics.occupation}}},
        {"medical_history", pp.medical_history},
        {"medications", pp.medications},
        {"social_history", pp.social_history},
        {"emotional_state",
         {{"label", to_string(pp.emotional_state.label)}, {"description", pp.emotional_state.description}}},
        {"communication_style", pp.communication_style},
        {"vocabulary_level", to_string(pp.vocabulary_level)},
        {"volunteered_info_policy", to_string(pp.volunteered_info_policy)},
        {"facts", facts}}},
      {"vitals", vitals},
      {"checklist", checklist}};
}

inline CaseDefinition case_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("invalid_case_file", "document root must be an object");
  return parse_case(j.dump());
}

}  // namespace medsim::cases
