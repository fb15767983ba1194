#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "medsim/core/csv.hpp"
#include "medsim/core/error.hpp"
#include "medsim/core/modality.hpp"
#include "medsim/core/time.hpp"

namespace medsim::analytics {

// One row per session. Rows flagged `excluded` (aborted before feedback was
// generated) are kept for audit but never enter a statistic.
struct TelemetryRow {
  std::string session_id;
  std::string learner_id;
  std::string institution_id;
  std::string case_id;
  int case_version = 1;
  Modality modality = Modality::text;
  double duration_minutes = 0.0;
  int turn_count = 0;
  double checklist_completion_pct = 0.0;
  double mirs_overall = std::numeric_limits<double>::quiet_NaN();
  std::size_t reflection_char_length = 0;
  TimePoint completed_at{};
  bool excluded = false;
};

inline const std::vector<std::string>& telemetry_columns() {
  static const std::vector<std::string> cols = {
      "session_id",       "learner_id",     "institution_id",          "case_id",
      "case_version",     "modality",       "duration_minutes",        "turn_count",
      "checklist_completion_pct", "mirs_overall", "reflection_char_length", "completed_at",
      "excluded"};
  return cols;
}

struct TelemetrySet {
  std::vector<TelemetryRow> rows;
  std::size_t n_excluded = 0;
  std::size_t n_learners = 0;  // distinct learners over included rows
};

inline std::vector<TelemetryRow> included(const std::vector<TelemetryRow>& rows) {
  std::vector<TelemetryRow> out;
  for (const auto& r : rows)
    if (!r.excluded) out.push_back(r);
  return out;
}

namespace detail {

inline double parse_double(const std::string& s, const std::string& column) {
  if (s.empty() || s == "NA" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw Error("schema_mismatch", column + ": not a number '" + s + "'");
  return v;
}

inline long parse_int(const std::string& s, const std::string& column) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error("schema_mismatch", column + ": not an integer '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& column) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw Error("schema_mismatch", column + ": not a boolean '" + s + "'");
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

// Parses a telemetry export. All row-level problems are collected and
// reported together, each with its source line number.
inline TelemetrySet parse_telemetry(const csv::Table& table) {
  for (const auto& col : telemetry_columns())
    if (!table.has_column(col))
      throw Error("schema_mismatch", "line 1: missing column '" + col + "'");
  std::vector<std::size_t> idx;
  for (const auto& col : telemetry_columns()) idx.push_back(table.column(col));

  TelemetrySet set;
  std::vector<std::string> problems;
  std::set<std::string> seen_sessions, learners;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "line " + std::to_string(table.line_numbers[r]) + ": ";
    if (row.size() != table.header.size()) {
      problems.push_back(where + "expected " + std::to_string(table.header.size()) +
                         " fields, found " + std::to_string(row.size()));
      continue;
    }
    auto field = [&](std::size_t k) -> const std::string& { return row[idx[k]]; };
    try {
      TelemetryRow t;
      t.session_id = field(0);
      t.learner_id = field(1);
      t.institution_id = field(2);
      t.case_id = field(3);
      if (t.session_id.empty() || t.learner_id.empty())
        throw Error("schema_mismatch", "session_id and learner_id are required");
      t.case_version = static_cast<int>(detail::parse_int(field(4), "case_version"));
      t.modality = parse_modality(field(5));
      t.duration_minutes = detail::parse_double(field(6), "duration_minutes");
      t.turn_count = static_cast<int>(detail::parse_int(field(7), "turn_count"));
      t.checklist_completion_pct = detail::parse_double(field(8), "checklist_completion_pct");
      t.mirs_overall = detail::parse_double(field(9), "mirs_overall");
      t.reflection_char_length =
          static_cast<std::size_t>(detail::parse_int(field(10), "reflection_char_length"));
      t.completed_at = parse_rfc3339(field(11));
      t.excluded = detail::parse_bool(field(12), "excluded");
      if (!seen_sessions.insert(t.session_id).second)
        throw Error("schema_mismatch", "duplicate session_id '" + t.session_id + "'");
      if (t.excluded) ++set.n_excluded;
      else learners.insert(t.learner_id);
      set.rows.push_back(std::move(t));
    } catch (const Error& e) {
      problems.push_back(where + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw Error("schema_mismatch", msg);
  }
  set.n_learners = learners.size();
  return set;
}

inline TelemetrySet ingest_telemetry(const std::string& path) {
  return parse_telemetry(csv::read_file(path));
}

inline void write_telemetry(std::ostream& out, const std::vector<TelemetryRow>& rows) {
  csv::write_row(out, telemetry_columns());
  for (const auto& r : rows) {
    csv::write_row(out, {r.session_id, r.learner_id, r.institution_id, r.case_id,
                         std::to_string(r.case_version), to_string(r.modality),
                         detail::format_number(r.duration_minutes), std::to_string(r.turn_count),
                         detail::format_number(r.checklist_completion_pct),
                         detail::format_number(r.mirs_overall),
                         std::to_string(r.reflection_char_length), format_rfc3339(r.completed_at),
                         r.excluded ? "true" : "false"});
  }
}

}  // namespace medsim::analytics
