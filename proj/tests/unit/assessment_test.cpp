#include <gtest/gtest.h>

#include <cctype>
#include <random>

#include "medsim/assessment/pipeline.hpp"
#include "medsim/case/repository.hpp"
#include "medsim/core/csv.hpp"
#include "medsim/llm/mock.hpp"
#include "medsim/session/engine.hpp"
#include "medsim/session/script.hpp"
#include "support/fixtures.hpp"

using namespace medsim;
using namespace medsim::assessment;
using namespace std::chrono_literals;

namespace {

struct World {
  cases::RubricRegistry rubrics;
  cases::CaseRepository repo{{}, &rubrics};
  ManualClock clock;
  llm::MockProvider mock;
  KeywordChecklistEvaluator keyword;
  session::SessionEngine engine{repo, mock, clock};
  World() {
    rubrics.add(medsim::testing::mirs());
    repo.publish(medsim::testing::sample_case());
  }
  session::Session run(const std::vector<std::string>& turns) {
    auto s = engine.start_session("learner-1", {"chest-pain-01", 0}, Modality::text);
    for (const auto& t : turns) {
      clock.advance(1min);
      engine.submit_turn(s.session_id, t);
    }
    return engine.complete_session(s.session_id);
  }
  AssessmentReport assess(const session::Session& s, llm::ChatProvider* provider = nullptr) {
    AssessmentPipeline p(rubrics, provider ? *provider : mock, keyword, clock);
    return p.assess(s, *repo.get(s.case_id, s.case_version));
  }
};

std::vector<std::string> script_turns(const std::string& name) {
  return session::load_encounter_script(medsim::testing::data_path("scripts/" + name)).turns;
}

// Independent normalizer for the oracle: lower-case, whitespace runs to one space, trimmed.
std::string oracle_norm(const std::string& s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace

TEST(Checklist, FullScriptCompletesEverything) {
  World w;
  auto s = w.run(script_turns("full_coverage.yaml"));
  auto r = w.assess(s);
  EXPECT_DOUBLE_EQ(r.checklist_completion_pct, 100.0);
  EXPECT_TRUE(r.grounding_violations.empty());
  EXPECT_TRUE(r.complete);
  auto def = w.repo.get("chest-pain-01");
  for (std::size_t i = 0; i < def->checklist.size(); ++i) {
    const auto& res = r.checklist_results[i];
    if (!def->checklist[i].required) continue;
    EXPECT_TRUE(res.assessed) << res.item_id;
    EXPECT_EQ(cases::to_string(def->checklist[i].finding_status), to_string(res.elicited_status)) << res.item_id;
    EXPECT_EQ(res.quotes.size(), 2u);
  }
}

TEST(Checklist, HalfScriptIsFiftyPercent) {
  World w;
  auto r = w.assess(w.run(script_turns("half_coverage.yaml")));
  EXPECT_DOUBLE_EQ(r.checklist_completion_pct, 50.0);
  EXPECT_TRUE(r.grounding_violations.empty());
}

TEST(Checklist, EvaluatorCases) {
  auto def = medsim::testing::sample_case();
  const auto& onset = def.checklist[0];
  Transcript t = {{Role::student, "When did it start?"}, {Role::patient, def.find_fact("F02")->statement}};
  auto r = evaluate_checklist_item(onset, def, t);
  EXPECT_TRUE(r.assessed);
  EXPECT_EQ(r.elicited_status, ElicitedStatus::present);
  EXPECT_EQ(r.quotes, (std::vector<std::string>{t[0].content, t[1].content}));

  Transcript unrelated = {{Role::student, "Any allergies?"}, {Role::patient, def.find_fact("F14")->statement}};
  r = evaluate_checklist_item(onset, def, unrelated);
  EXPECT_FALSE(r.assessed);
  EXPECT_EQ(r.elicited_status, ElicitedStatus::not_assessed);

  Transcript dont_know = {{Role::student, "When did it start?"}, {Role::patient, "I don't know, honestly."}};
  r = evaluate_checklist_item(onset, def, dont_know);
  EXPECT_TRUE(r.assessed);
  EXPECT_EQ(r.elicited_status, ElicitedStatus::unknown);

  const auto& fever = def.checklist[8];
  Transcript neg = {{Role::student, "Any fevers?"}, {Role::patient, def.find_fact("F10")->statement}};
  EXPECT_EQ(evaluate_checklist_item(fever, def, neg).elicited_status, ElicitedStatus::absent);

  const auto& cholesterol = def.checklist[12];
  Transcript chol = {{Role::student, "Do you know your cholesterol?"}, {Role::patient, def.find_fact("F17")->statement}};
  r = evaluate_checklist_item(cholesterol, def, chol);
  EXPECT_TRUE(r.assessed);
  EXPECT_EQ(r.elicited_status, ElicitedStatus::unknown);
}

TEST(Checklist, CompletionIsBoundedAndMonotone) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ChecklistResult> rs;
    int n = 1 + static_cast<int>(rng() % 15);
    for (int i = 0; i < n; ++i) rs.push_back({"I" + std::to_string(i), rng() % 3 != 0, rng() % 2 == 0});
    double before = checklist_completion(rs);
    EXPECT_GE(before, 0.0);
    EXPECT_LE(before, 100.0);
    for (auto& r : rs)
      if (r.required && !r.assessed) {
        r.assessed = true;
        double after = checklist_completion(rs);
        EXPECT_GE(after, before);
        before = after;
      }
  }
}

TEST(Assessment, EmptyTranscript) {
  World w;
  auto s = w.run({});
  llm::ScriptedProvider never;  // any call would throw
  auto r = w.assess(s, &never);
  EXPECT_EQ(never.calls(), 0u);
  EXPECT_DOUBLE_EQ(r.checklist_completion_pct, 0.0);
  for (const auto& c : r.checklist_results) {
    EXPECT_FALSE(c.assessed);
    EXPECT_EQ(c.elicited_status, ElicitedStatus::not_assessed);
  }
  int na = 0;
  for (const auto& sc : r.rubric_scores) {
    if (sc.not_applicable) ++na;
    else EXPECT_EQ(sc.score, 1);
  }
  EXPECT_EQ(na, 7);
  ASSERT_TRUE(r.mirs_overall);
  EXPECT_DOUBLE_EQ(*r.mirs_overall, 1.0);
}

TEST(Assessment, NotApplicableItemsFollowCaseTags) {
  World w;
  auto r = w.assess(w.run(script_turns("full_coverage.yaml")));
  int na = 0, scored = 0;
  double sum = 0;
  for (const auto& s : r.rubric_scores) {
    if (s.not_applicable) ++na;
    if (s.score) {
      ++scored;
      sum += *s.score;
    }
  }
  EXPECT_EQ(na, 7);
  EXPECT_EQ(scored, 21);
  ASSERT_TRUE(r.mirs_overall);
  EXPECT_DOUBLE_EQ(*r.mirs_overall, sum / scored);
}

TEST(Assessment, MirsOverallIsItemMean) {
  // 19 applicable items summing to 68.
  std::vector<ItemScore> scores;
  std::vector<int> values = {4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 3, 3, 3, 3, 3, 3, 3, 3};
  int total = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    scores.push_back({"MIRS", "MIRS" + std::to_string(i + 1), values[i]});
    total += values[i];
  }
  ASSERT_EQ(total, 68);
  for (int i = 0; i < 9; ++i) {
    ItemScore na{"MIRS", "NA" + std::to_string(i)};
    na.not_applicable = true;
    scores.push_back(na);
  }
  auto m = rubric_mean(scores, "MIRS");
  ASSERT_TRUE(m);
  EXPECT_NEAR(*m, 3.579, 5e-4);
  EXPECT_DOUBLE_EQ(*m, 68.0 / 19.0);
}

TEST(Assessment, ElementAggregates) {
  std::map<std::string, std::string> map = {{"A", "gather_information"}, {"B", "gather_information"},
                                            {"C", "provide_closure"}};
  std::vector<ItemScore> scores = {{"R", "A", 3}, {"R", "B", 5}, {"R", "C"}, {"R", "D", 2}};
  scores[2].not_applicable = true;
  auto agg = aggregate_elements(scores, map);
  EXPECT_EQ(agg.size(), 1u);
  EXPECT_DOUBLE_EQ(agg.at("gather_information"), 4.0);
}

TEST(Assessment, ElementAggregatesMatchSpreadsheet) {
  auto rubric = medsim::testing::mirs();
  auto table = csv::read_file(medsim::testing::data_path("fixtures/element_scores.csv"));
  auto expected = csv::read_file(medsim::testing::data_path("fixtures/element_means.csv"));
  std::map<std::string, std::vector<ItemScore>> by_sheet;
  for (const auto& row : table.rows) {
    ItemScore s{"MIRS", row[table.column("item_id")]};
    const auto& v = row[table.column("score")];
    if (v == "N/A") s.not_applicable = true;
    else s.score = std::stoi(v);
    by_sheet[row[table.column("sheet")]].push_back(s);
  }
  ASSERT_FALSE(expected.rows.empty());
  for (const auto& row : expected.rows) {
    auto agg = aggregate_elements(by_sheet.at(row[expected.column("sheet")]), rubric.element_map);
    const auto& element = row[expected.column("element")];
    const auto& mean = row[expected.column("mean")];
    if (mean == "omitted") EXPECT_EQ(agg.count(element), 0u) << element;
    else EXPECT_NEAR(agg.at(element), std::stod(mean), 1e-12) << element;
  }
}

TEST(Assessment, FailedItemsAreListedAndExcluded) {
  World w;
  auto s = w.run({"Hello, what brings you in today?", "When did it start?"});
  llm::ScriptedProvider flaky;
  flaky.set_fallback([](const llm::ChatExchange& ex) {
    auto parsed = cases::parse_scoring_prompt(ex.system_prompt);
    if (parsed && parsed->item_id == "MIRS02") return llm::ProviderResult{"{\"score\": 9}", 0, "x", false};
    if (parsed && parsed->item_id == "MIRS03") throw llm::ProviderError("timeout", "slow");
    return llm::ProviderResult{R"({"score": 4, "justification": "ok", "quotes": ["When did it start?"]})", 0, "x", false};
  });
  auto r = w.assess(s, &flaky);
  EXPECT_FALSE(r.complete);
  EXPECT_EQ(r.failed_items, (std::vector<std::string>{"MIRS:MIRS02", "MIRS:MIRS03"}));
  ASSERT_TRUE(r.mirs_overall);
  EXPECT_DOUBLE_EQ(*r.mirs_overall, 4.0);
  for (const auto& sc : r.rubric_scores)
    if (sc.item_id == "MIRS02") {
      EXPECT_TRUE(sc.failed);
      EXPECT_FALSE(sc.score);
    }
}

TEST(Assessment, ProviderChecklistEvaluatorFailurePolicy) {
  auto def = medsim::testing::sample_case();
  Transcript t = {{Role::student, "When did it start?"}, {Role::patient, "Three days ago."}};
  llm::ScriptedProvider p;
  p.reply("Sure: {\"assessed\": true, \"status\": \"present\", \"quotes\": [\"When did it start?\"]}");
  ProviderChecklistEvaluator ev(p);
  auto r = ev.evaluate(def.checklist[0], def, t);
  EXPECT_TRUE(r.assessed);
  EXPECT_EQ(r.elicited_status, ElicitedStatus::present);
  for (int i = 0; i < 3; ++i) p.reply("{\"assessed\": \"maybe\"}");
  r = ev.evaluate(def.checklist[0], def, t);
  EXPECT_TRUE(r.failed);
  EXPECT_FALSE(r.assessed);

  std::vector<ChecklistResult> rs = {{"a", true, true}, {"b", true, false}};
  rs[1].failed = true;
  EXPECT_DOUBLE_EQ(checklist_completion(rs), 50.0);
  EXPECT_DOUBLE_EQ(checklist_completion(rs, true), 100.0);
}

TEST(Assessment, RequiresCompletedSession) {
  World w;
  auto s = w.engine.start_session("l", {"chest-pain-01", 0}, Modality::text);
  EXPECT_THROW(w.assess(s), Error);
  auto aborted = w.engine.abort_session(s.session_id);
  EXPECT_THROW(w.assess(aborted), Error);
}

TEST(Assessment, ReportJsonRoundTripAndRecomputation) {
  World w;
  auto r = w.assess(w.run(script_turns("full_coverage.yaml")));
  auto j = to_json(r);
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  auto back = report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back, r);
  // Stored aggregates equal a fresh recomputation from stored items.
  EXPECT_EQ(rubric_mean(back.rubric_scores, "MIRS"), back.mirs_overall);
  EXPECT_EQ(aggregate_elements(back.rubric_scores, medsim::testing::mirs().element_map), back.element_aggregates);
  EXPECT_DOUBLE_EQ(checklist_completion(back.checklist_results), back.checklist_completion_pct);
}

TEST(Grounding, VerbatimWhitespaceAndFabricated) {
  Transcript t = {{Role::student, "Can you describe   the pain?"}, {Role::patient, "It is a HEAVY pressure."}};
  AssessmentReport r;
  r.rubric_scores = {{"MIRS", "MIRS01", 3}, {"MIRS", "MIRS02", 3}, {"MIRS", "MIRS03", 3}};
  r.rubric_scores[0].quotes = {"Can you describe   the pain?"};
  r.rubric_scores[1].quotes = {"describe the\n pain", "it is a heavy pressure"};
  r.rubric_scores[2].quotes = {"The pain is crushing."};
  auto v = verify_grounding(r, t);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].item_id, "MIRS:MIRS03");
  EXPECT_EQ(v[0].quote, "The pain is crushing.");
  EXPECT_TRUE(r.rubric_scores[0].grounded);
  EXPECT_TRUE(r.rubric_scores[1].grounded);
  EXPECT_FALSE(r.rubric_scores[2].grounded);
  r.rubric_scores[0].quotes = {"   "};
  EXPECT_EQ(verify_grounding(r, t).size(), 2u);
}

TEST(Grounding, FuzzedReports) {
  std::mt19937 rng(2025);
  const std::vector<std::string> vocab = {"pain", "chest", "when", "did", "it", "start", "my", "father", "heart",
                                          "I",    "don't", "know", "the", "left", "arm", "Yes", "no",     "since"};
  int grounded_quotes = 0, fabricated_quotes = 0;
  for (int report_no = 0; report_no < 500; ++report_no) {
    Transcript t;
    int n_utt = 1 + static_cast<int>(rng() % 8);
    for (int u = 0; u < n_utt; ++u) {
      std::string s;
      int words = 1 + static_cast<int>(rng() % 12);
      for (int k = 0; k < words; ++k) s += (k ? (rng() % 5 == 0 ? "  " : " ") : "") + vocab[rng() % vocab.size()];
      t.push_back({u % 2 ? Role::patient : Role::student, s});
    }
    AssessmentReport r;
    std::vector<std::vector<bool>> fabricated;
    int n_items = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n_items; ++i) {
      ItemScore s{"MIRS", "I" + std::to_string(i), 3};
      std::vector<bool> fab;
      int n_q = static_cast<int>(rng() % 4);
      for (int q = 0; q < n_q; ++q) {
        if (rng() % 3 == 0) {
          s.quotes.push_back(vocab[rng() % vocab.size()] + " zq" + std::to_string(rng() % 1000) + " " +
                             vocab[rng() % vocab.size()]);
          fab.push_back(true);
        } else {
          // A word-aligned slice of one utterance with perturbed case and spacing.
          const auto& src = t[rng() % t.size()].content;
          auto words = text::split(text::normalize_for_match(src), ' ');
          std::size_t a = rng() % words.size(), b = a + rng() % (words.size() - a);
          std::string quote;
          for (std::size_t k = a; k <= b; ++k) {
            std::string w = words[k];
            if (rng() % 2) for (auto& c : w) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            quote += (k > a ? (rng() % 2 ? "\t " : " ") : "") + w;
          }
          s.quotes.push_back(quote);
          fab.push_back(false);
        }
      }
      fabricated.push_back(fab);
      r.rubric_scores.push_back(std::move(s));
    }
    auto violations = verify_grounding(r, t);
    std::string joined;
    for (const auto& u : t) joined += u.content + "\n";
    const auto hay = oracle_norm(joined);
    std::size_t expected_violations = 0;
    for (std::size_t i = 0; i < r.rubric_scores.size(); ++i) {
      const auto& s = r.rubric_scores[i];
      bool all = true;
      for (std::size_t q = 0; q < s.quotes.size(); ++q) {
        bool in = hay.find(oracle_norm(s.quotes[q])) != std::string::npos;
        EXPECT_EQ(in, !fabricated[i][q]) << s.quotes[q];
        all = all && in;
        expected_violations += !in;
        (fabricated[i][q] ? fabricated_quotes : grounded_quotes)++;
      }
      EXPECT_EQ(s.grounded, all);
      if (s.grounded)
        for (const auto& q : s.quotes) EXPECT_NE(hay.find(oracle_norm(q)), std::string::npos);
    }
    EXPECT_EQ(violations.size(), expected_violations);
  }
  EXPECT_GT(grounded_quotes, 500);
  EXPECT_GT(fabricated_quotes, 200);
}

TEST(Assessment, FullScriptIsFast) {
  World w;
  auto start = std::chrono::steady_clock::now();
  auto r = w.assess(w.run(script_turns("full_coverage.yaml")));
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 5.0);
  EXPECT_LT(r.generation_latency_ms, 5000);
}
