#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "medsim/assessment/pipeline.hpp"
#include "medsim/hub/hub.hpp"
#include "medsim/llm/mock.hpp"
#include "support/fixtures.hpp"

using namespace medsim;
using namespace std::chrono_literals;

namespace {

struct World {
  cases::RubricRegistry rubrics;
  cases::CaseRepository repo{{}, &rubrics};
  ManualClock clock;
  llm::MockProvider mock;
  assessment::KeywordChecklistEvaluator keyword;
  session::SessionEngine engine{repo, mock, clock};
  assessment::ReportStore reports;
  hub::LearningHub hub{repo, engine, reports, clock};
  World() {
    rubrics.add(medsim::testing::mirs());
    repo.publish(medsim::testing::sample_case());
  }
  session::Session run(const std::string& learner, const std::vector<std::string>& turns, bool abort = false) {
    auto s = engine.start_session(learner, {"chest-pain-01", 0}, Modality::text);
    for (const auto& t : turns) {
      clock.advance(1min);
      engine.submit_turn(s.session_id, t);
    }
    clock.advance(1min);
    return abort ? engine.abort_session(s.session_id) : engine.complete_session(s.session_id);
  }
  std::shared_ptr<const assessment::AssessmentReport> assess(const session::Session& s) {
    assessment::AssessmentPipeline p(rubrics, mock, keyword, clock);
    return reports.put(p.assess(s, *repo.get(s.case_id, s.case_version)));
  }
  // A report carrying only the given element means.
  void fake_report(const session::Session& s, std::map<std::string, double> elements) {
    assessment::AssessmentReport r;
    r.session_id = s.session_id;
    r.case_id = s.case_id;
    r.case_version = s.case_version;
    r.element_aggregates = std::move(elements);
    r.mirs_overall = 3.0;
    reports.put(r);
  }
};

// Test-local UTF-8 encoder for the code-point oracle.
std::string encode(const std::vector<char32_t>& cps) {
  std::string out;
  for (char32_t c : cps) {
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else if (c < 0x800) {
      out += static_cast<char>(0xC0 | (c >> 6));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
      out += static_cast<char>(0xE0 | (c >> 12));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (c >> 18));
      out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    }
  }
  return out;
}

}  // namespace

TEST(Reflection, LengthInCodePoints) {
  World w;
  auto s = w.run("amy", {"Hello"});
  std::string text = "I should have asked about the family first";
  ASSERT_EQ(text.size(), 42u);
  EXPECT_EQ(w.hub.record_reflection("amy", s.session_id, text).char_length, 42u);

  std::vector<char32_t> cps = {U'N', U'a', 0x00EF, U'v', U'e', U' ', 0x2013, U' ', 0x5FD8, 0x4E86, U' ', 0x1F600};
  auto multi = encode(cps);
  ASSERT_GT(multi.size(), cps.size());
  auto r = w.hub.record_reflection("amy", s.session_id, multi);
  EXPECT_EQ(r.char_length, cps.size());
  EXPECT_EQ(r.text, multi);
  EXPECT_THROW(w.hub.record_reflection("amy", s.session_id, std::string("bad \xC3(", 6)), Error);
}

TEST(Reflection, RandomTextsCountCodePoints) {
  World w;
  auto s = w.run("amy", {});
  std::mt19937 rng(17);
  for (int i = 0; i < 200; ++i) {
    std::vector<char32_t> cps;
    int n = 1 + static_cast<int>(rng() % 60);
    for (int k = 0; k < n; ++k) {
      switch (rng() % 4) {
        case 0: cps.push_back(U'a' + rng() % 26); break;
        case 1: cps.push_back(0xA0 + rng() % 0x700); break;
        case 2: cps.push_back(0x3041 + rng() % 0x5000); break;
        default: cps.push_back(0x1F300 + rng() % 0x200); break;
      }
    }
    EXPECT_EQ(w.hub.record_reflection("amy", s.session_id, encode(cps)).char_length, cps.size());
  }
}

TEST(Reflection, Preconditions) {
  World w;
  auto active = w.engine.start_session("amy", {"chest-pain-01", 0}, Modality::text);
  try {
    w.hub.record_reflection("amy", active.session_id, "too early");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "session_not_terminal");
  }
  w.engine.complete_session(active.session_id);
  try {
    w.hub.record_reflection("bob", active.session_id, "not mine");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "not_owner");
  }
  try {
    w.hub.record_reflection("amy", "ses-999999", "nothing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unknown_session");
  }
  EXPECT_THROW(w.hub.record_reflection("amy", active.session_id, "   "), Error);
}

TEST(Reflection, LockedOnceNextSessionStarts) {
  World w;
  auto first = w.run("amy", {"Hello"});
  w.hub.record_reflection("amy", first.session_id, "draft");
  w.clock.advance(1min);
  auto edited = w.hub.record_reflection("amy", first.session_id, "final text");
  EXPECT_EQ(edited.text, "final text");
  EXPECT_EQ(w.hub.reflections("amy").size(), 1u);
  // Another learner's session does not lock it.
  w.clock.advance(1min);
  w.run("bob", {});
  w.hub.record_reflection("amy", first.session_id, "still editable");
  w.clock.advance(1min);
  w.engine.start_session("amy", {"chest-pain-01", 0}, Modality::voice);
  try {
    w.hub.record_reflection("amy", first.session_id, "too late");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "reflection_locked");
  }
  EXPECT_EQ(w.hub.reflection_for(first.session_id)->text, "still editable");
}

TEST(Goals, SetAndUpdate) {
  World w;
  auto g = w.hub.set_goal("amy", "Ask about family history every time", "gather_information");
  EXPECT_EQ(g.status, hub::GoalStatus::open);
  EXPECT_THROW(w.hub.set_goal("amy", ""), Error);
  EXPECT_THROW(w.hub.set_goal("amy", "x", "bedside_manner"), Error);
  EXPECT_THROW(w.hub.set_goal_status("bob", g.goal_id, hub::GoalStatus::achieved), Error);
  EXPECT_EQ(w.hub.set_goal_status("amy", g.goal_id, hub::GoalStatus::achieved).status, hub::GoalStatus::achieved);
  EXPECT_EQ(w.hub.goals("amy").size(), 1u);
  EXPECT_TRUE(w.hub.goals("bob").empty());
  EXPECT_EQ(hub::goal_from_json(hub::to_json(w.hub.goals("amy")[0])), w.hub.goals("amy")[0]);
}

TEST(Appointments, FutureOnly) {
  World w;
  auto a = w.hub.schedule("amy", {"chest-pain-01", 0}, w.clock.now() + 24h);
  EXPECT_EQ(a.status, hub::AppointmentStatus::scheduled);
  try {
    w.hub.schedule("amy", {"chest-pain-01", 0}, w.clock.now());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "appointment_in_past");
  }
  EXPECT_THROW(w.hub.schedule("amy", {"no-such-case", 0}, w.clock.now() + 1h), Error);
  EXPECT_THROW(w.hub.schedule("amy", {"chest-pain-01", 7}, w.clock.now() + 1h), Error);
  w.hub.set_appointment_status("amy", a.appointment_id, hub::AppointmentStatus::completed);
  EXPECT_EQ(w.hub.appointments("amy")[0].status, hub::AppointmentStatus::completed);
  EXPECT_EQ(hub::appointment_from_json(hub::to_json(w.hub.appointments("amy")[0])), w.hub.appointments("amy")[0]);
}

TEST(Progress, OrderedSeriesPerElement) {
  World w;
  auto s1 = w.run("amy", {"Hello"});
  w.clock.advance(1h);
  auto s2 = w.run("amy", {"Hello"});
  // Stored out of order on purpose; the series follows start time.
  w.fake_report(s2, {{"gather_information", 4.0}});
  w.fake_report(s1, {{"gather_information", 3.0}, {"open_discussion", 2.5}});
  auto p = w.hub.progress_series("amy");
  EXPECT_EQ(p.elements.at("gather_information"),
            (std::vector<hub::ProgressPoint>{{1, s1.session_id, 3.0}, {2, s2.session_id, 4.0}}));
  EXPECT_EQ(p.elements.at("open_discussion").size(), 1u);
  EXPECT_FALSE(p.global_mean);
  EXPECT_EQ(w.hub.progress_series("amy", true).global_mean->size(), 2u);
}

TEST(Progress, AbortedOnlyIsNoData) {
  World w;
  w.run("amy", {"Hello"}, true);
  try {
    w.hub.progress_series("amy");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "no_data");
  }
  EXPECT_THROW(w.hub.progress_series("nobody"), Error);
}

TEST(Progress, SeriesEqualsStoredAggregates) {
  World w;
  const std::vector<std::vector<std::string>> scripts = {
      {"Hello, what brings you in today?"},
      {"Hello", "When did it start?", "Does the pain spread anywhere?", "Any medications?"},
      {},
  };
  std::vector<std::string> ids;
  for (const auto& sc : scripts) {
    auto s = w.run("amy", sc);
    w.assess(s);
    ids.push_back(s.session_id);
    w.clock.advance(2h);
  }
  w.run("amy", {"Hello"}, true);
  auto p = w.hub.progress_series("amy");
  std::size_t points = 0;
  for (const auto& [element, series] : p.elements)
    for (const auto& pt : series) {
      ++points;
      EXPECT_EQ(pt.session_id, ids[pt.session_index - 1]);
      EXPECT_DOUBLE_EQ(pt.value, w.reports.get(pt.session_id)->element_aggregates.at(element));
    }
  std::size_t expected = 0;
  for (const auto& id : ids) expected += w.reports.get(id)->element_aggregates.size();
  EXPECT_EQ(points, expected);
}

TEST(ChartReview, NewestFirstWithFlags) {
  World w;
  std::vector<session::Session> done;
  for (int i = 0; i < 3; ++i) {
    done.push_back(w.run("amy", {"Hello", "When did it start?"}));
    w.assess(done.back());
    w.clock.advance(1h);
  }
  auto aborted = w.run("amy", {"Hello"}, true);
  w.engine.start_session("amy", {"chest-pain-01", 0}, Modality::text);  // active, not listed
  auto chart = w.hub.chart_review("amy");
  ASSERT_EQ(chart.size(), 4u);
  EXPECT_EQ(chart[0].session.session_id, aborted.session_id);
  EXPECT_TRUE(chart[0].aborted);
  EXPECT_FALSE(chart[0].report);
  for (int i = 1; i < 4; ++i) {
    EXPECT_FALSE(chart[i].aborted);
    ASSERT_TRUE(chart[i].report);
    EXPECT_EQ(chart[i].session.session_id, done[3 - i].session_id);
    EXPECT_GE(chart[i - 1].session.started_at, chart[i].session.started_at);
    const auto stored = w.engine.get(chart[i].session.session_id);
    EXPECT_EQ(chart[i].transcript_hash, session::transcript_hash(stored, stored.turns.size()));
    EXPECT_EQ(chart[i].report->transcript_hash, chart[i].transcript_hash);
  }
}

TEST(Hub, ArtifactsNeverTouchAssessments) {
  World w;
  auto s = w.run("amy", {"Hello", "When did it start?"});
  auto before = *w.assess(s);
  w.hub.set_goal("amy", "Summarize more", "gather_information");
  w.hub.record_reflection("amy", s.session_id, "Missed the family history.");
  w.hub.schedule("amy", {"chest-pain-01", 0}, w.clock.now() + 48h);
  w.hub.progress_series("amy", true);
  w.hub.chart_review("amy");
  EXPECT_EQ(*w.reports.get(s.session_id), before);
  EXPECT_EQ(w.engine.get(s.session_id), s);
}

TEST(Hub, ReflectionExport) {
  World w;
  auto s1 = w.run("amy", {"Hello"});
  w.hub.record_reflection("amy", s1.session_id, "Line one,\nwith a \"quote\"");
  auto s2 = w.run("bob", {});
  w.hub.record_reflection("bob", s2.session_id, "Short");
  std::ostringstream out;
  w.hub.export_reflections(out);
  std::istringstream in(out.str());
  auto t = csv::read(in);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][t.column("text")], "Line one,\nwith a \"quote\"");
  EXPECT_EQ(t.rows[0][t.column("session_id")], s1.session_id);
  EXPECT_EQ(t.rows[0][t.column("case_id")], "chest-pain-01");
  EXPECT_EQ(t.rows[1][t.column("char_length")], "5");
}
