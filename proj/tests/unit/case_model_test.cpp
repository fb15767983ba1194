#include <gtest/gtest.h>

#include <random>
#include <set>

#include "medsim/case/io.hpp"
#include "medsim/case/prompt.hpp"
#include "medsim/case/repository.hpp"
#include "medsim/case/rubric.hpp"
#include "medsim/case/validate.hpp"
#include "support/fixtures.hpp"

using namespace medsim;
using namespace medsim::cases;
using medsim::testing::mirs;
using medsim::testing::sample_case;

namespace {

const RubricRegistry& registry() {
  static RubricRegistry r;
  if (!r.contains("MIRS")) r.add(mirs());
  return r;
}

Transcript short_transcript() {
  return {{Role::student, "Hello, I'm a student doctor. What brings you in today?"},
          {Role::patient, "I've been getting this pressure in the middle of my chest that comes and goes."},
          {Role::student, "When did it start?"},
          {Role::patient, "It started about three days ago while I was carrying groceries up the stairs."}};
}

std::string remove_between(const std::string& s, const std::string& begin, const std::string& end) {
  auto b = s.find(begin);
  auto e = s.find(end);
  return s.substr(0, b) + s.substr(e + end.size());
}

std::string between(const std::string& s, const std::string& begin, const std::string& end) {
  auto b = s.find(begin);
  return s.substr(b, s.find(end) - b);
}

// Random valid case; every field drawn from small pools.
CaseDefinition random_case(std::mt19937_64& rng) {
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  static const std::vector<std::string> words = {"pain",  "cough", "sleep", "appetite", "weight", "mood",
                                                 "fever", "rash",  "bowel", "urine",    "vision", "dizzy"};
  CaseDefinition c;
  c.case_id = "case-" + std::to_string(pick(1000));
  c.version = static_cast<int>(1 + pick(5));
  c.title = "Random case " + words[pick(words.size())];
  c.institution_id = "inst-" + std::string(1, static_cast<char>('a' + pick(3)));
  c.duration_limit_minutes = static_cast<int>(1 + pick(30));
  c.rubric_ids = {"MIRS"};
  c.patient_profile.demographics = {"Pat " + words[pick(words.size())], std::to_string(18 + pick(70)), "they/them",
                                    "teacher"};
  c.patient_profile.vocabulary_level = static_cast<VocabularyLevel>(pick(3));
  c.patient_profile.volunteered_info_policy = static_cast<DisclosurePolicy>(pick(3));
  c.patient_profile.emotional_state.label = static_cast<EmotionalLabel>(pick(7));
  std::size_t n_facts = 1 + pick(8);
  for (std::size_t i = 0; i < n_facts; ++i) {
    Fact f;
    f.fact_id = "F" + std::to_string(i + 1);
    f.topic_tags = {words[pick(words.size())], words[pick(words.size())] + " history"};
    f.statement = "Statement " + std::to_string(i) + " about " + words[pick(words.size())] + " | detail.";
    f.elicit_only = pick(2) == 1;
    c.patient_profile.fact_table.push_back(f);
  }
  std::size_t n_items = pick(5);
  for (std::size_t i = 0; i < n_items; ++i) {
    ChecklistItem it;
    it.item_id = "CL" + std::to_string(i + 1);
    it.prompt_text = "Ask about " + words[pick(words.size())];
    it.required = i == 0 || pick(2) == 1;
    it.finding_status = static_cast<FindingStatus>(pick(3));
    it.fact_ids = {"F" + std::to_string(1 + pick(n_facts))};
    c.checklist.push_back(it);
  }
  if (pick(3) == 0) c.prompt_clauses["persona"] = "Be {name}, consistently.";
  return c;
}

}  // namespace

TEST(CaseModel, SampleCaseValidates) {
  const auto& reg = registry();
  auto c = sample_case();
  auto outcome = validate_case(c, {}, &reg);
  EXPECT_TRUE(outcome.ok()) << (outcome.ok() ? "" : outcome.violations.front().message);
  EXPECT_EQ(c.duration_limit_minutes, 30);
  int required = 0;
  for (const auto& it : c.checklist) required += it.required;
  EXPECT_EQ(required, 12);
  EXPECT_EQ(c.patient_profile.vocabulary_level, VocabularyLevel::lay);
}

TEST(CaseModel, VocabularyDefaultsToLay) {
  auto c = parse_case(R"(
case_id: x
title: t
rubrics: [MIRS]
patient: {demographics: {name: A}}
)");
  EXPECT_EQ(c.patient_profile.vocabulary_level, VocabularyLevel::lay);
  EXPECT_EQ(c.duration_limit_minutes, 30);
  EXPECT_TRUE(validate_case(c).ok());
}

TEST(CaseModel, DurationBounds) {
  auto c = sample_case();
  c.duration_limit_minutes = 0;
  EXPECT_TRUE(validate_case(c).has("duration_limit_out_of_range"));
  c.duration_limit_minutes = 31;
  EXPECT_TRUE(validate_case(c).has("duration_limit_out_of_range"));
  c.duration_limit_minutes = 1;
  EXPECT_TRUE(validate_case(c).ok());
  c.duration_limit_minutes = 45;
  EXPECT_TRUE(validate_case(c, ValidationLimits{60}).ok());
}

TEST(CaseModel, UnresolvableFinding) {
  auto c = sample_case();
  c.checklist[0].fact_ids = {};
  c.checklist[0].finding_status = FindingStatus::present;
  auto v = validate_case(c);
  EXPECT_TRUE(v.has("unresolvable_finding"));
  c.checklist[0].finding_status = FindingStatus::unknown;
  EXPECT_TRUE(validate_case(c).ok());

  c = sample_case();
  c.checklist[0].fact_ids = {"F99"};
  v = validate_case(c);
  EXPECT_TRUE(v.has("unresolvable_finding"));
  EXPECT_TRUE(v.has("unknown_fact_reference"));
}

TEST(CaseModel, StructuralViolations) {
  const auto& reg = registry();
  auto c = sample_case();
  c.checklist[1].item_id = c.checklist[0].item_id;
  c.rubric_ids.push_back("SPIKES");
  c.prompt_template_id = "nope";
  c.checklist[2].kalamazoo_element = "charm";
  c.prompt_clauses["tone"] = "x";
  c.patient_profile.fact_table.push_back(c.patient_profile.fact_table[0]);
  auto v = validate_case(c, {}, &reg);
  for (const char* code : {"duplicate_checklist_item", "unknown_rubric", "unknown_prompt_template",
                           "unknown_kalamazoo_element", "unknown_prompt_clause", "duplicate_fact_id"})
    EXPECT_TRUE(v.has(code)) << code;

  auto bare = sample_case();
  bare.rubric_ids.clear();
  bare.checklist.clear();
  EXPECT_TRUE(validate_case(bare).has("no_assessment_attached"));

  auto optional_only = sample_case();
  for (auto& it : optional_only.checklist) it.required = false;
  EXPECT_TRUE(validate_case(optional_only).has("no_required_checklist_item"));
}

TEST(CaseModel, ParseErrorsNameTheField) {
  try {
    parse_case("case_id: x\ntitle: t\npatient: {vocabulary_level: posh}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "invalid_case_file");
    EXPECT_NE(std::string(e.what()).find("vocabulary_level"), std::string::npos);
  }
  try {
    parse_case("case_id: x\ntitle: t\npatient: {facts: [{id: F1}]}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("patient.facts[0].statement"), std::string::npos);
  }
  EXPECT_THROW(parse_case("schema_version: 9\ncase_id: x\ntitle: t\npatient: {}\n"), Error);
  EXPECT_THROW(parse_case("[unclosed"), Error);
}

TEST(CaseModel, JsonRoundTrip) {
  auto c = sample_case();
  c.version = 3;
  c.prompt_clauses["refusal"] = "Décline politely — stay in role.";
  EXPECT_EQ(case_from_json(to_json(c)), c);
}

TEST(PatientPrompt, MandatoryClauses) {
  auto c = sample_case();
  auto prompt = render_patient_prompt(c);
  EXPECT_NE(prompt.find("Avoid medical jargon"), std::string::npos);
  EXPECT_NE(prompt.find("lay terms"), std::string::npos);
  EXPECT_NE(prompt.find("Do not volunteer information"), std::string::npos);
  EXPECT_NE(prompt.find("Stay in character as Daniel Reyes"), std::string::npos);
  EXPECT_NE(prompt.find("## Out-of-character requests"), std::string::npos);
  EXPECT_NE(prompt.find("decline briefly in character"), std::string::npos);
  EXPECT_NE(prompt.find("under 600 characters"), std::string::npos);
  EXPECT_NE(prompt.find("- Blood pressure: 148/92 mmHg"), std::string::npos);
  EXPECT_EQ(prompt, render_patient_prompt(c));
}

TEST(PatientPrompt, PolicyAndVocabularyVariants) {
  auto c = sample_case();
  c.patient_profile.volunteered_info_policy = DisclosurePolicy::forthcoming;
  c.patient_profile.vocabulary_level = VocabularyLevel::technical;
  auto prompt = render_patient_prompt(c);
  EXPECT_EQ(prompt.find("Do not volunteer information"), std::string::npos);
  EXPECT_EQ(prompt.find("Avoid medical jargon"), std::string::npos);
  EXPECT_NE(prompt.find("clinical terminology"), std::string::npos);

  c.prompt_clauses["vocabulary"] = "Speak like a pirate, {name}.";
  prompt = render_patient_prompt(c);
  EXPECT_NE(prompt.find("Speak like a pirate, Daniel Reyes."), std::string::npos);
}

TEST(PatientPrompt, InvalidCaseRejected) {
  auto c = sample_case();
  c.duration_limit_minutes = 0;
  try {
    render_patient_prompt(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "invalid_case");
  }
}

TEST(PatientPrompt, FactTableRoundTrips) {
  auto c = sample_case();
  auto facts = parse_fact_table(render_patient_prompt(c));
  ASSERT_EQ(facts.size(), c.patient_profile.fact_table.size());
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const auto& f = c.patient_profile.fact_table[i];
    EXPECT_EQ(facts[i].fact_id, f.fact_id);
    EXPECT_EQ(facts[i].tags, f.topic_tags);
    EXPECT_EQ(facts[i].elicit_only, f.elicit_only);
    EXPECT_EQ(facts[i].statement, f.statement);
  }
}

TEST(PatientPrompt, RandomCasesRenderDeterministically) {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 300; ++trial) {
    auto c = random_case(rng);
    ASSERT_TRUE(validate_case(c).ok()) << validate_case(c).violations.front().message;
    auto a = render_patient_prompt(c);
    auto copy = c;
    EXPECT_EQ(a, render_patient_prompt(copy));
    for (const char* section : {"## Identity", "## Background", "## Fact table", "## Behaviour",
                                "## Out-of-character requests"})
      EXPECT_NE(a.find(section), std::string::npos) << section;
    for (const auto& id : clause_ids()) EXPECT_NE(a.find(resolve_clause(c, id)), std::string::npos) << id;
    auto facts = parse_fact_table(a);
    ASSERT_EQ(facts.size(), c.patient_profile.fact_table.size());
    for (std::size_t i = 0; i < facts.size(); ++i)
      EXPECT_EQ(facts[i].statement, c.patient_profile.fact_table[i].statement);
  }
}

TEST(Rubric, MirsDataFile) {
  auto r = mirs();
  EXPECT_EQ(r.items.size(), 28u);
  EXPECT_TRUE(validate_rubric(r).empty());
  std::size_t not_for_history = 0;
  for (const auto& it : r.items) {
    EXPECT_EQ(it.anchors.size(), 5u);
    if (!item_applies(it, sample_case().tags)) ++not_for_history;
  }
  EXPECT_EQ(not_for_history, 7u);
  EXPECT_EQ(r.element_map.size(), 28u);
  std::set<std::string> used;
  for (const auto& [item, element] : r.element_map) used.insert(element);
  EXPECT_EQ(used.size(), 7u);

  auto broken = r;
  broken.items.pop_back();
  broken.items[0].anchors.erase(3);
  auto problems = validate_rubric(broken);
  EXPECT_GE(problems.size(), 2u);
}

TEST(ScoringPrompt, EmbedsAnchorsAndTranscript) {
  auto r = mirs();
  auto t = short_transcript();
  auto prompt = render_item_scoring_prompt(r, "MIRS04", t);
  for (const auto& [score, anchor] : r.find_item("MIRS04")->anchors) EXPECT_NE(prompt.find(anchor), std::string::npos);
  for (const auto& u : t) EXPECT_NE(prompt.find(u.content), std::string::npos);
  EXPECT_NE(prompt.find("\"quotes\""), std::string::npos);
  EXPECT_NE(prompt.find("\"justification\""), std::string::npos);

  auto parsed = parse_scoring_prompt(prompt);
  ASSERT_TRUE(parsed);
  EXPECT_EQ(parsed->item_id, "MIRS04");
  EXPECT_EQ(parsed->rubric_id, "MIRS");
  EXPECT_EQ(parsed->anchors, r.find_item("MIRS04")->anchors);
  EXPECT_EQ(parsed->transcript, t);
}

TEST(ScoringPrompt, Preconditions) {
  auto r = mirs();
  try {
    render_item_scoring_prompt(r, "MIRS04", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "empty_transcript");
  }
  try {
    render_item_scoring_prompt(r, "MIRS99", short_transcript());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unknown_item");
  }
}

TEST(ScoringPrompt, ItemsDifferOnlyInCriteriaBlock) {
  auto r = mirs();
  auto t = short_transcript();
  for (std::size_t i = 0; i + 1 < r.items.size(); ++i) {
    auto a = render_item_scoring_prompt(r, r.items[i].item_id, t);
    auto b = render_item_scoring_prompt(r, r.items[i + 1].item_id, t);
    EXPECT_NE(a, b);
    EXPECT_EQ(remove_between(a, kCriteriaBegin, kCriteriaEnd), remove_between(b, kCriteriaBegin, kCriteriaEnd));
    EXPECT_NE(between(a, kCriteriaBegin, kCriteriaEnd), between(b, kCriteriaBegin, kCriteriaEnd));
  }
}

TEST(CaseRepository, VersionsOnChangeOnly) {
  CaseRepository repo;
  auto v1 = repo.publish(sample_case());
  EXPECT_EQ(v1->version, 1);
  auto prompt_v1 = render_patient_prompt(*v1);
  EXPECT_EQ(repo.publish(sample_case())->version, 1);

  auto edited = sample_case();
  edited.duration_limit_minutes = 20;
  auto v2 = repo.publish(edited);
  EXPECT_EQ(v2->version, 2);
  EXPECT_EQ(repo.get("chest-pain-01")->version, 2);
  EXPECT_EQ(repo.get("chest-pain-01", 1)->duration_limit_minutes, 30);
  EXPECT_EQ(render_patient_prompt(*repo.get("chest-pain-01", 1)), prompt_v1);

  try {
    repo.get("chest-pain-01", 7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unknown_case");
  }
  EXPECT_THROW(repo.get("nope"), Error);
  auto bad = sample_case();
  bad.duration_limit_minutes = 0;
  EXPECT_THROW(repo.publish(bad), Error);
}
