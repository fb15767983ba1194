#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <vector>

#include "medsim/assessment/store.hpp"
#include "medsim/case/repository.hpp"
#include "medsim/core/clock.hpp"
#include "medsim/core/csv.hpp"
#include "medsim/core/text.hpp"
#include "medsim/hub/artifacts.hpp"
#include "medsim/session/engine.hpp"

namespace medsim::hub {

struct ProgressPoint {
  std::size_t session_index = 0;  // 1-based over the learner's scored sessions
  std::string session_id;
  double value = 0.0;
  bool operator==(const ProgressPoint&) const = default;
};

struct ProgressSeries {
  std::string learner_id;
  std::map<std::string, std::vector<ProgressPoint>> elements;
  std::optional<std::vector<ProgressPoint>> global_mean;  // only when asked for
};

struct ChartEntry {
  session::Session session;
  std::shared_ptr<const assessment::AssessmentReport> report;  // null for aborted or pending
  bool aborted = false;
  std::string transcript_hash;
  std::optional<Reflection> reflection;
};

// Goals, reflections and appointments. Reads sessions and reports, never
// writes them.
class LearningHub {
 public:
  LearningHub(const cases::CaseRepository& cases, const session::SessionEngine& sessions,
              const assessment::ReportStore& reports, const Clock& clock)
      : cases_(cases), sessions_(sessions), reports_(reports), clock_(clock) {}

  // ---- goals ----

  Goal set_goal(const std::string& learner_id, const std::string& text,
                const std::optional<std::string>& target_element = std::nullopt) {
    if (text::trim(learner_id).empty()) throw Error("unknown_learner", "learner_id is required");
    if (text::trim(text).empty()) throw Error("invalid_goal", "goal text is empty");
    if (target_element && !cases::is_kalamazoo_element(*target_element))
      throw Error("unknown_element", "'" + *target_element + "' is not a Kalamazoo element");
    std::unique_lock lock(mu_);
    Goal g{next_id("goal", goals_.size()), learner_id, text, target_element, clock_.now(), GoalStatus::open};
    goals_.push_back(g);
    return g;
  }

  Goal set_goal_status(const std::string& learner_id, const std::string& goal_id, GoalStatus status) {
    std::unique_lock lock(mu_);
    for (auto& g : goals_)
      if (g.goal_id == goal_id) {
        if (g.learner_id != learner_id) throw Error("not_owner", goal_id + " belongs to another learner");
        g.status = status;
        return g;
      }
    throw Error("unknown_goal", "no goal " + goal_id);
  }

  std::vector<Goal> goals(const std::string& learner_id) const {
    std::shared_lock lock(mu_);
    std::vector<Goal> out;
    for (const auto& g : goals_)
      if (g.learner_id == learner_id) out.push_back(g);
    return out;
  }

  // ---- reflections ----

  // One reflection per session. It may be written or edited until the learner
  // starts another session; after that it is locked.
  Reflection record_reflection(const std::string& learner_id, const std::string& session_id,
                               const std::string& body) {
    if (!text::valid_utf8(body)) throw Error("invalid_reflection", "reflection is not valid UTF-8");
    if (text::trim(body).empty()) throw Error("invalid_reflection", "reflection text is empty");
    auto s = sessions_.get(session_id);
    if (s.learner_id != learner_id) throw Error("not_owner", session_id + " belongs to another learner");
    if (!s.terminal()) throw Error("session_not_terminal", session_id + " is still active");
    if (started_after(s)) throw Error("reflection_locked", "a later session has started; reflection is locked");

    std::unique_lock lock(mu_);
    const auto now = clock_.now();
    auto it = reflections_.find(session_id);
    if (it != reflections_.end()) {
      it->second.text = body;
      it->second.char_length = text::code_points(body);
      it->second.updated_at = now;
      return it->second;
    }
    Reflection r{next_id("refl", reflections_.size()), learner_id, session_id, body, text::code_points(body), now, now};
    reflections_.emplace(session_id, r);
    return r;
  }

  std::optional<Reflection> reflection_for(const std::string& session_id) const {
    std::shared_lock lock(mu_);
    auto it = reflections_.find(session_id);
    if (it == reflections_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<Reflection> reflections(const std::string& learner_id = {}) const {
    std::shared_lock lock(mu_);
    std::vector<Reflection> out;
    for (const auto& [sid, r] : reflections_)
      if (learner_id.empty() || r.learner_id == learner_id) out.push_back(r);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.reflection_id < b.reflection_id; });
    return out;
  }

  std::size_t reflection_length(const std::string& session_id) const {
    auto r = reflection_for(session_id);
    return r ? r->char_length : 0;
  }

  // ---- appointments ----

  Appointment schedule(const std::string& learner_id, const cases::CaseRef& ref, TimePoint when) {
    if (text::trim(learner_id).empty()) throw Error("unknown_learner", "learner_id is required");
    if (!cases_.contains(ref.case_id)) throw Error("unknown_case", "no case " + ref.case_id);
    if (ref.version != 0) cases_.get(ref.case_id, ref.version);
    const auto now = clock_.now();
    if (when <= now) throw Error("appointment_in_past", "appointments must be scheduled in the future");
    std::unique_lock lock(mu_);
    Appointment a{next_id("appt", appointments_.size()), learner_id, ref, when, AppointmentStatus::scheduled, now};
    appointments_.push_back(a);
    return a;
  }

  Appointment set_appointment_status(const std::string& learner_id, const std::string& id, AppointmentStatus st) {
    std::unique_lock lock(mu_);
    for (auto& a : appointments_)
      if (a.appointment_id == id) {
        if (a.learner_id != learner_id) throw Error("not_owner", id + " belongs to another learner");
        a.status = st;
        return a;
      }
    throw Error("unknown_appointment", "no appointment " + id);
  }

  std::vector<Appointment> appointments(const std::string& learner_id) const {
    std::shared_lock lock(mu_);
    std::vector<Appointment> out;
    for (const auto& a : appointments_)
      if (a.learner_id == learner_id) out.push_back(a);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.scheduled_for < b.scheduled_for; });
    return out;
  }

  // ---- progress and charts ----

  ProgressSeries progress_series(const std::string& learner_id, bool with_global_mean = false) const {
    auto list = sessions_.sessions_for_learner(learner_id);
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
      return a.started_at < b.started_at || (a.started_at == b.started_at && a.session_id < b.session_id);
    });
    ProgressSeries out;
    out.learner_id = learner_id;
    if (with_global_mean) out.global_mean.emplace();
    std::size_t index = 0;
    for (const auto& s : list) {
      if (s.state != session::SessionState::completed) continue;
      auto report = reports_.find(s.session_id);
      if (!report) continue;
      ++index;
      for (const auto& [element, mean] : report->element_aggregates)
        out.elements[element].push_back({index, s.session_id, mean});
      if (with_global_mean && report->mirs_overall)
        out.global_mean->push_back({index, s.session_id, *report->mirs_overall});
    }
    if (index == 0) throw Error("no_data", "no scored sessions for learner " + learner_id);
    return out;
  }

  // Past encounters, newest first. Aborted sessions are flagged and carry no report.
  std::vector<ChartEntry> chart_review(const std::string& learner_id) const {
    auto list = sessions_.sessions_for_learner(learner_id);
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
      return a.started_at > b.started_at || (a.started_at == b.started_at && a.session_id > b.session_id);
    });
    std::vector<ChartEntry> out;
    for (auto& s : list) {
      if (!s.terminal()) continue;
      ChartEntry e;
      e.aborted = s.state == session::SessionState::aborted;
      if (!e.aborted) e.report = reports_.find(s.session_id);
      e.transcript_hash = session::transcript_hash(s, s.turns.size());
      e.reflection = reflection_for(s.session_id);
      e.session = std::move(s);
      out.push_back(std::move(e));
    }
    return out;
  }

  // Delimited export for qualitative coding, keyed by session.
  void export_reflections(std::ostream& out) const {
    csv::write_row(out, {"reflection_id", "learner_id", "session_id", "case_id", "case_version", "created_at",
                         "updated_at", "char_length", "text"});
    for (const auto& r : reflections()) {
      std::string case_id, version;
      if (sessions_.contains(r.session_id)) {
        auto s = sessions_.get(r.session_id);
        case_id = s.case_id;
        version = std::to_string(s.case_version);
      }
      csv::write_row(out, {r.reflection_id, r.learner_id, r.session_id, case_id, version, format_rfc3339(r.created_at),
                           format_rfc3339(r.updated_at), std::to_string(r.char_length), r.text});
    }
  }

  // ---- replay ----

  void restore(const Goal& g) {
    std::unique_lock lock(mu_);
    for (auto& existing : goals_)
      if (existing.goal_id == g.goal_id) {
        existing = g;
        return;
      }
    goals_.push_back(g);
  }
  void restore(const Reflection& r) {
    std::unique_lock lock(mu_);
    reflections_[r.session_id] = r;
  }
  void restore(const Appointment& a) {
    std::unique_lock lock(mu_);
    for (auto& existing : appointments_)
      if (existing.appointment_id == a.appointment_id) {
        existing = a;
        return;
      }
    appointments_.push_back(a);
  }

  std::vector<Goal> all_goals() const {
    std::shared_lock lock(mu_);
    return goals_;
  }
  std::vector<Appointment> all_appointments() const {
    std::shared_lock lock(mu_);
    return appointments_;
  }

 private:
  bool started_after(const session::Session& s) const {
    for (const auto& other : sessions_.sessions_for_learner(s.learner_id))
      if (other.session_id != s.session_id && other.started_at > s.started_at) return true;
    return false;
  }

  static std::string next_id(const char* prefix, std::size_t count) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, count + 1);
    return buf;
  }

  const cases::CaseRepository& cases_;
  const session::SessionEngine& sessions_;
  const assessment::ReportStore& reports_;
  const Clock& clock_;
  mutable std::shared_mutex mu_;
  std::vector<Goal> goals_;
  std::map<std::string, Reflection> reflections_;  // by session
  std::vector<Appointment> appointments_;
};

}  // namespace medsim::hub
