#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "medsim/analytics/agreement.hpp"
#include "medsim/analytics/engagement.hpp"
#include "medsim/analytics/lagged.hpp"
#include "medsim/analytics/model_frame.hpp"
#include "medsim/analytics/telemetry.hpp"

using namespace medsim;
using namespace medsim::analytics;

TEST(Agreement, BoundarySemantics) {
  const std::vector<ScorePair> one{{2, 3}};
  const auto r = scoring_agreement(one);
  EXPECT_EQ(r.exact, 0.0);
  EXPECT_EQ(r.off_by_one, 1.0);
  EXPECT_EQ(r.thresholded, 0.0);
  EXPECT_EQ(r.n_pairs, 1u);
}

TEST(Agreement, IdenticalVectors) {
  std::vector<ScorePair> pairs;
  for (int s = 1; s <= 5; ++s) pairs.push_back({s, s});
  const auto r = scoring_agreement(pairs);
  EXPECT_EQ(r.exact, 1.0);
  EXPECT_EQ(r.off_by_one, 1.0);
  EXPECT_EQ(r.thresholded, 1.0);
}

TEST(Agreement, Errors) {
  EXPECT_THROW(scoring_agreement(std::vector<ScorePair>{}), Error);
  EXPECT_THROW(scoring_agreement(std::vector<ScorePair>{{0, 3}}), Error);
}

TEST(Agreement, ExactNeverExceedsOffByOne) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> score(1, 5), len(1, 60);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<ScorePair> pairs(static_cast<std::size_t>(len(rng)));
    for (auto& p : pairs) p = {score(rng), score(rng)};
    const auto r = scoring_agreement(pairs);
    EXPECT_LE(r.exact, r.off_by_one);
    for (double v : {r.exact, r.off_by_one, r.thresholded}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

namespace {

TelemetryRow row(std::string session, std::string learner, std::string inst, Modality m,
                 double mirs, int minute, bool excluded = false) {
  TelemetryRow r;
  r.session_id = std::move(session);
  r.learner_id = std::move(learner);
  r.institution_id = std::move(inst);
  r.case_id = "C1";
  r.modality = m;
  r.duration_minutes = 15;
  r.turn_count = 30;
  r.checklist_completion_pct = 50;
  r.mirs_overall = mirs;
  r.completed_at = TimePoint{} + std::chrono::minutes(minute);
  r.excluded = excluded;
  return r;
}

}  // namespace

TEST(Engagement, SingleLearnerOneTextSession) {
  const auto t = engagement_summary({row("s1", "L1", "A", Modality::text, 3.5, 1)});
  EXPECT_EQ(t.overall.students, 1u);
  EXPECT_EQ(t.overall.exactly_one.n, 1u);
  EXPECT_DOUBLE_EQ(t.overall.exactly_one.pct, 100.0);
  EXPECT_EQ(t.overall.text_only.n, 1u);
  EXPECT_EQ(t.overall.voice_only.n, 0u);
  EXPECT_TRUE(std::isnan(t.overall.cases_per_student.sd));
}

TEST(Engagement, ExcludedRowsNeverCount) {
  const auto t = engagement_summary({row("s1", "L1", "A", Modality::text, 3.5, 1),
                                     row("s2", "L1", "A", Modality::voice, 3.5, 2, true)});
  EXPECT_EQ(t.overall.total_cases, 1u);
  EXPECT_EQ(t.overall.text_only.n, 1u);
  EXPECT_THROW(engagement_summary({row("s2", "L1", "A", Modality::voice, 3, 2, true)}), Error);
}

TEST(Engagement, RandomFixtureMatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> learner(0, 30), inst(0, 2), coin(0, 1), turns(5, 80);
  std::normal_distribution<double> noise(0, 1);
  std::vector<TelemetryRow> rows;
  std::map<int, std::string> home;
  for (int i = 0; i < 200; ++i) {
    const int l = learner(rng);
    if (!home.count(l)) home[l] = std::string(1, static_cast<char>('A' + inst(rng)));
    auto r = row("s" + std::to_string(i), "L" + std::to_string(l), home[l],
                 coin(rng) ? Modality::voice : Modality::text, 3.5 + 0.5 * noise(rng), i,
                 i % 17 == 0);
    r.turn_count = turns(rng);
    r.duration_minutes = 18 + 5 * noise(rng);
    rows.push_back(r);
  }
  const auto t = engagement_summary(rows);
  // Brute force over the overall group.
  std::set<std::string> learners;
  std::size_t cases = 0;
  for (const auto& r : rows)
    if (!r.excluded) {
      learners.insert(r.learner_id);
      ++cases;
    }
  std::vector<double> per;
  std::size_t one = 0, two = 0, five = 0, vo = 0, to = 0, both = 0;
  for (const auto& l : learners) {
    double c = 0;
    bool v = false, tx = false;
    for (const auto& r : rows)
      if (!r.excluded && r.learner_id == l) {
        ++c;
        (r.modality == Modality::voice ? v : tx) = true;
      }
    per.push_back(c);
    one += c == 1;
    two += c >= 2;
    five += c >= 5;
    vo += v && !tx;
    to += tx && !v;
    both += v && tx;
  }
  double m = 0;
  for (double c : per) m += c;
  m /= static_cast<double>(per.size());
  double ss = 0;
  for (double c : per) ss += (c - m) * (c - m);
  const double sd = std::sqrt(ss / static_cast<double>(per.size() - 1));
  EXPECT_EQ(t.overall.students, learners.size());
  EXPECT_EQ(t.overall.total_cases, cases);
  EXPECT_NEAR(t.overall.cases_per_student.mean, m, 1e-12);
  EXPECT_NEAR(t.overall.cases_per_student.sd, sd, 1e-12);
  EXPECT_EQ(t.overall.exactly_one.n, one);
  EXPECT_EQ(t.overall.two_plus.n, two);
  EXPECT_EQ(t.overall.five_plus.n, five);
  EXPECT_EQ(t.overall.voice_only.n, vo);
  EXPECT_EQ(t.overall.text_only.n, to);
  EXPECT_EQ(t.overall.both_modalities.n, both);
  std::size_t grouped = 0;
  for (const auto& g : t.groups) grouped += g.total_cases;
  EXPECT_EQ(grouped, cases);

  std::ostringstream out;
  write_engagement_csv(out, t);
  EXPECT_NE(out.str().find("cases_per_student_mean"), std::string::npos);
}

TEST(Lagged, Deltas) {
  auto a = row("s1", "L1", "A", Modality::text, 3.0, 1);
  auto b = row("s2", "L1", "A", Modality::text, 3.4, 5);
  auto lag = lagged_mirs_change({b, a});
  ASSERT_EQ(lag.size(), 1u);
  EXPECT_NEAR(lag[0].delta_mirs, 0.4, 1e-12);
  EXPECT_EQ(lag[0].session_id, "s1");

  auto aborted = row("s3", "L1", "A", Modality::text, 1.0, 3, true);
  lag = lagged_mirs_change({a, aborted, b});
  ASSERT_EQ(lag.size(), 1u);
  EXPECT_EQ(lag[0].next_session_id, "s2");

  EXPECT_TRUE(lagged_mirs_change({a}).empty());
}

TEST(Telemetry, ParseErrorsCarryLineNumbers) {
  std::ostringstream out;
  write_telemetry(out, {row("s1", "L1", "A", Modality::text, 3.0, 1),
                        row("s1", "L2", "A", Modality::voice, 3.0, 2)});
  std::istringstream in(out.str());
  try {
    parse_telemetry(csv::read(in));
    FAIL() << "duplicate session ids must be rejected";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "schema_mismatch");
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::istringstream missing("session_id,learner_id\ns1,L1\n");
  EXPECT_THROW(parse_telemetry(csv::read(missing)), Error);
}

TEST(Telemetry, AbortedRowReducesAnalyticN) {
  std::ostringstream out;
  write_telemetry(out, {row("s1", "L1", "A", Modality::text, 3.0, 1),
                        row("s2", "L2", "A", Modality::voice, 3.0, 2, true)});
  std::istringstream in(out.str());
  const auto set = parse_telemetry(csv::read(in));
  EXPECT_EQ(set.rows.size(), 2u);
  EXPECT_EQ(set.n_excluded, 1u);
  EXPECT_TRUE(set.rows[1].excluded);
  EXPECT_EQ(engagement_summary(set.rows).overall.total_cases, 1u);
}

TEST(ModelFrame, TreatmentCodingAndAsOfSessionCount) {
  std::vector<TelemetryRow> rows{row("s1", "L1", "A", Modality::text, 3.0, 1),
                                 row("s2", "L1", "B", Modality::voice, 3.2, 9),
                                 row("s3", "L2", "C", Modality::text, 3.4, 4),
                                 row("s4", "L1", "A", Modality::text, 3.6, 5, true)};
  const auto frame = frame_from_telemetry(rows);
  const auto d = frame.design("mirs_overall", {"institution_id", "session_count"});
  EXPECT_EQ(d.y.size(), 3);
  ASSERT_EQ(d.fixed_names.size(), 4u);
  EXPECT_EQ(d.fixed_names[1], "institution_id[B]");
  EXPECT_EQ(d.fixed_names[2], "institution_id[C]");
  EXPECT_EQ(d.X(1, 3), 2.0);  // second completed session for L1
  EXPECT_EQ(d.X(2, 3), 1.0);
  EXPECT_THROW(frame.design("mirs_overall", {"nope"}), Error);
}
