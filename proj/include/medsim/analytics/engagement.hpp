#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "medsim/analytics/descriptive.hpp"
#include "medsim/analytics/telemetry.hpp"
#include "medsim/core/csv.hpp"
#include "medsim/core/error.hpp"

namespace medsim::analytics {

struct Count {
  std::size_t n = 0;
  double pct = 0.0;  // of students in the group
};

struct EngagementMetrics {
  std::string group;
  std::size_t students = 0;
  std::size_t total_cases = 0;
  MeanSd cases_per_student;
  Count exactly_one, two_plus, five_plus;
  MeanSd duration_minutes;
  MeanSd turns;
  Count voice_only, text_only, both_modalities;
  MeanSd mirs_overall;
  MeanSd checklist_pct;
};

struct EngagementTable {
  std::vector<EngagementMetrics> groups;  // sorted by group key
  EngagementMetrics overall;
};

namespace detail {

inline EngagementMetrics summarize_group(const std::string& name,
                                         const std::vector<const TelemetryRow*>& rows) {
  EngagementMetrics m;
  m.group = name;
  struct Learner {
    std::size_t cases = 0;
    bool voice = false, text = false;
  };
  std::map<std::string, Learner> learners;
  std::vector<double> durations, turns, mirs, checklist;
  for (const auto* r : rows) {
    auto& l = learners[r->learner_id];
    ++l.cases;
    (r->modality == Modality::voice ? l.voice : l.text) = true;
    durations.push_back(r->duration_minutes);
    turns.push_back(static_cast<double>(r->turn_count));
    if (!std::isnan(r->mirs_overall)) mirs.push_back(r->mirs_overall);
    if (!std::isnan(r->checklist_completion_pct)) checklist.push_back(r->checklist_completion_pct);
  }
  m.students = learners.size();
  m.total_cases = rows.size();
  std::vector<double> per_student;
  for (const auto& [id, l] : learners) {
    per_student.push_back(static_cast<double>(l.cases));
    m.exactly_one.n += l.cases == 1;
    m.two_plus.n += l.cases >= 2;
    m.five_plus.n += l.cases >= 5;
    m.voice_only.n += l.voice && !l.text;
    m.text_only.n += l.text && !l.voice;
    m.both_modalities.n += l.voice && l.text;
  }
  const double s = static_cast<double>(m.students);
  for (Count* c : {&m.exactly_one, &m.two_plus, &m.five_plus, &m.voice_only, &m.text_only,
                   &m.both_modalities})
    c->pct = 100.0 * static_cast<double>(c->n) / s;
  m.cases_per_student = mean_sd(per_student);
  m.duration_minutes = mean_sd(durations);
  m.turns = mean_sd(turns);
  m.mirs_overall = mean_sd(mirs);
  m.checklist_pct = mean_sd(checklist);
  return m;
}

}  // namespace detail

// Per-institution and overall engagement over non-excluded rows.
inline EngagementTable engagement_summary(const std::vector<TelemetryRow>& rows) {
  std::map<std::string, std::vector<const TelemetryRow*>> by_group;
  std::vector<const TelemetryRow*> all;
  for (const auto& r : rows) {
    if (r.excluded) continue;
    by_group[r.institution_id].push_back(&r);
    all.push_back(&r);
  }
  if (all.empty()) throw Error("empty_input", "no non-excluded telemetry rows");
  EngagementTable t;
  for (const auto& [g, rs] : by_group) t.groups.push_back(detail::summarize_group(g, rs));
  t.overall = detail::summarize_group("overall", all);
  return t;
}

inline std::vector<std::string> engagement_metric_names() {
  return {"students",           "total_cases",       "cases_per_student_mean",
          "cases_per_student_sd", "n_1_case",        "pct_1_case",
          "n_2plus_cases",      "pct_2plus_cases",   "n_5plus_cases",
          "pct_5plus_cases",    "duration_min_mean", "duration_min_sd",
          "turns_mean",         "turns_sd",          "n_voice_only",
          "pct_voice_only",     "n_text_only",       "pct_text_only",
          "n_both_modalities",  "pct_both_modalities", "mirs_overall_mean",
          "mirs_overall_sd",    "checklist_pct_mean", "checklist_pct_sd"};
}

inline std::vector<double> engagement_metric_values(const EngagementMetrics& m) {
  auto d = [](std::size_t v) { return static_cast<double>(v); };
  return {d(m.students),           d(m.total_cases),         m.cases_per_student.mean,
          m.cases_per_student.sd,  d(m.exactly_one.n),       m.exactly_one.pct,
          d(m.two_plus.n),         m.two_plus.pct,           d(m.five_plus.n),
          m.five_plus.pct,         m.duration_minutes.mean,  m.duration_minutes.sd,
          m.turns.mean,            m.turns.sd,               d(m.voice_only.n),
          m.voice_only.pct,        d(m.text_only.n),         m.text_only.pct,
          d(m.both_modalities.n),  m.both_modalities.pct,    m.mirs_overall.mean,
          m.mirs_overall.sd,       m.checklist_pct.mean,     m.checklist_pct.sd};
}

inline std::string format_metric(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// metric,<group...>,overall with one row per metric.
inline void write_engagement_csv(std::ostream& out, const EngagementTable& t) {
  std::vector<std::string> header{"metric"};
  for (const auto& g : t.groups) header.push_back(g.group);
  header.push_back("overall");
  csv::write_row(out, header);
  const auto names = engagement_metric_names();
  std::vector<std::vector<double>> cols;
  for (const auto& g : t.groups) cols.push_back(engagement_metric_values(g));
  cols.push_back(engagement_metric_values(t.overall));
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<std::string> row{names[i]};
    for (const auto& c : cols) row.push_back(format_metric(c[i]));
    csv::write_row(out, row);
  }
}

// Table-style rendering for terminals.
inline void write_engagement_summary(std::ostream& out, const EngagementTable& t) {
  std::vector<const EngagementMetrics*> cols;
  for (const auto& g : t.groups) cols.push_back(&g);
  cols.push_back(&t.overall);
  auto line = [&](const char* label, auto cell) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-28s", label);
    out << buf;
    for (const auto* c : cols) {
      std::snprintf(buf, sizeof buf, "%18s", cell(*c).c_str());
      out << buf;
    }
    out << '\n';
  };
  auto pm = [](const MeanSd& v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f+/-%.*f", prec, v.mean, prec, v.sd);
    return std::string(buf);
  };
  auto cnt = [](const Count& c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu (%.1f%%)", c.n, c.pct);
    return std::string(buf);
  };
  line("", [](const EngagementMetrics& m) { return m.group; });
  line("Students (n)", [](const EngagementMetrics& m) { return std::to_string(m.students); });
  line("Total cases completed", [](const EngagementMetrics& m) { return std::to_string(m.total_cases); });
  line("Cases / student", [&](const EngagementMetrics& m) { return pm(m.cases_per_student, 2); });
  line("Students completed: 1 case", [&](const EngagementMetrics& m) { return cnt(m.exactly_one); });
  line("  2+ cases", [&](const EngagementMetrics& m) { return cnt(m.two_plus); });
  line("  5+ cases", [&](const EngagementMetrics& m) { return cnt(m.five_plus); });
  line("Conversation duration (min)", [&](const EngagementMetrics& m) { return pm(m.duration_minutes, 1); });
  line("Dialogue turns per case", [&](const EngagementMetrics& m) { return pm(m.turns, 1); });
  line("Voice-only users", [&](const EngagementMetrics& m) { return cnt(m.voice_only); });
  line("Text-only users", [&](const EngagementMetrics& m) { return cnt(m.text_only); });
  line("Both modalities", [&](const EngagementMetrics& m) { return cnt(m.both_modalities); });
  line("MIRS overall score", [&](const EngagementMetrics& m) { return pm(m.mirs_overall, 2); });
  line("Checklist completion (%)", [&](const EngagementMetrics& m) { return pm(m.checklist_pct, 1); });
}

}  // namespace medsim::analytics
