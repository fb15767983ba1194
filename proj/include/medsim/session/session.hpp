#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medsim/core/error.hpp"
#include "medsim/core/hash.hpp"
#include "medsim/core/modality.hpp"
#include "medsim/core/time.hpp"
#include "medsim/core/transcript.hpp"

namespace medsim::session {

enum class SessionState { active, completed, aborted };

inline std::string to_string(SessionState s) {
  switch (s) {
    case SessionState::active: return "active";
    case SessionState::completed: return "completed";
    case SessionState::aborted: return "aborted";
  }
  return "?";
}

inline SessionState parse_state(const std::string& s) {
  if (s == "active") return SessionState::active;
  if (s == "completed") return SessionState::completed;
  if (s == "aborted") return SessionState::aborted;
  throw Error("invalid_argument", "unknown session state '" + s + "'");
}

struct Turn {
  Role role = Role::student;
  std::string content;
  TimePoint timestamp{};
  int sequence_no = 0;
  bool operator==(const Turn&) const = default;
};

struct Session {
  std::string session_id;
  std::string learner_id;
  std::string institution_id;
  std::string case_id;
  int case_version = 0;
  Modality modality = Modality::text;
  SessionState state = SessionState::active;
  TimePoint started_at{};
  std::optional<TimePoint> ended_at;
  std::string end_reason;  // completed, time_expired, aborted
  int duration_limit_minutes = 30;
  std::string patient_prompt;  // rendered once at start and kept with the session
  std::vector<Turn> turns;
  bool operator==(const Session&) const = default;

  bool terminal() const { return state != SessionState::active; }
  TimePoint deadline() const { return started_at + std::chrono::minutes(duration_limit_minutes); }
  double duration_minutes() const { return ended_at ? minutes_between(started_at, *ended_at) : 0.0; }
  // One dialogue turn per utterance.
  int turn_count() const { return static_cast<int>(turns.size()); }
  int student_turns() const {
    int n = 0;
    for (const auto& t : turns) n += t.role == Role::student;
    return n;
  }
  bool awaiting_reply() const {
    return !turns.empty() && turns.back().role == Role::student && state == SessionState::active;
  }
  Transcript transcript() const {
    Transcript t;
    for (const auto& turn : turns) t.push_back({turn.role, turn.content});
    return t;
  }
};

// Hash over turns 1..k (all turns when k exceeds the count).
inline std::string transcript_hash(const Session& s, std::size_t k = static_cast<std::size_t>(-1)) {
  Fnv1a h;
  for (std::size_t i = 0; i < s.turns.size() && i < k; ++i) {
    const auto& t = s.turns[i];
    h.update(std::to_string(t.sequence_no)).update("\x1f").update(to_string(t.role)).update("\x1f");
    h.update(format_rfc3339(t.timestamp)).update("\x1f").update(t.content).update("\x1e");
  }
  return h.hex();
}

inline nlohmann::json to_json(const Turn& t) {
  return {{"sequence_no", t.sequence_no},
          {"role", to_string(t.role)},
          {"content", t.content},
          {"timestamp", format_rfc3339(t.timestamp)}};
}

inline Turn turn_from_json(const nlohmann::json& j) {
  return {parse_role(j.at("role").get<std::string>()), j.at("content").get<std::string>(),
          parse_rfc3339(j.at("timestamp").get<std::string>()), j.at("sequence_no").get<int>()};
}

inline nlohmann::json to_json(const Session& s, bool with_turns = true) {
  nlohmann::json j = {{"session_id", s.session_id},
                      {"learner_id", s.learner_id},
                      {"institution_id", s.institution_id},
                      {"case_id", s.case_id},
                      {"case_version", s.case_version},
                      {"modality", to_string(s.modality)},
                      {"state", to_string(s.state)},
                      {"started_at", format_rfc3339(s.started_at)},
                      {"ended_at", s.ended_at ? nlohmann::json(format_rfc3339(*s.ended_at)) : nlohmann::json()},
                      {"end_reason", s.end_reason},
                      {"duration_limit_minutes", s.duration_limit_minutes},
                      {"duration_minutes", s.duration_minutes()},
                      {"turn_count", s.turn_count()},
                      {"transcript_hash", transcript_hash(s)}};
  if (with_turns) {
    j["patient_prompt"] = s.patient_prompt;
    j["turns"] = nlohmann::json::array();
    for (const auto& t : s.turns) j["turns"].push_back(to_json(t));
  }
  return j;
}

inline Session session_from_json(const nlohmann::json& j) {
  Session s;
  s.session_id = j.at("session_id");
  s.learner_id = j.at("learner_id");
  s.institution_id = j.at("institution_id");
  s.case_id = j.at("case_id");
  s.case_version = j.at("case_version");
  s.modality = parse_modality(j.at("modality").get<std::string>());
  s.state = parse_state(j.at("state"));
  s.started_at = parse_rfc3339(j.at("started_at").get<std::string>());
  if (j.contains("ended_at") && !j["ended_at"].is_null()) s.ended_at = parse_rfc3339(j["ended_at"].get<std::string>());
  s.end_reason = j.value("end_reason", "");
  s.duration_limit_minutes = j.at("duration_limit_minutes");
  s.patient_prompt = j.value("patient_prompt", "");
  if (j.contains("turns"))
    for (const auto& t : j["turns"]) s.turns.push_back(turn_from_json(t));
  return s;
}

}  // namespace medsim::session
