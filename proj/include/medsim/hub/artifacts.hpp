#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "medsim/case/types.hpp"
#include "medsim/core/error.hpp"
#include "medsim/core/time.hpp"

namespace medsim::hub {

enum class GoalStatus { open, achieved, dropped };
enum class AppointmentStatus { scheduled, completed, missed };

inline std::string to_string(GoalStatus s) {
  switch (s) {
    case GoalStatus::open: return "open";
    case GoalStatus::achieved: return "achieved";
    case GoalStatus::dropped: return "dropped";
  }
  return "open";
}

inline GoalStatus parse_goal_status(const std::string& s) {
  if (s == "open") return GoalStatus::open;
  if (s == "achieved") return GoalStatus::achieved;
  if (s == "dropped") return GoalStatus::dropped;
  throw Error("invalid_goal", "unknown goal status '" + s + "'");
}

inline std::string to_string(AppointmentStatus s) {
  switch (s) {
    case AppointmentStatus::scheduled: return "scheduled";
    case AppointmentStatus::completed: return "completed";
    case AppointmentStatus::missed: return "missed";
  }
  return "scheduled";
}

inline AppointmentStatus parse_appointment_status(const std::string& s) {
  if (s == "scheduled") return AppointmentStatus::scheduled;
  if (s == "completed") return AppointmentStatus::completed;
  if (s == "missed") return AppointmentStatus::missed;
  throw Error("invalid_appointment", "unknown appointment status '" + s + "'");
}

struct Goal {
  std::string goal_id;
  std::string learner_id;
  std::string text;
  std::optional<std::string> target_element;
  TimePoint created_at{};
  GoalStatus status = GoalStatus::open;
  bool operator==(const Goal&) const = default;
};

struct Reflection {
  std::string reflection_id;
  std::string learner_id;
  std::string session_id;
  std::string text;
  std::size_t char_length = 0;  // code points
  TimePoint created_at{};
  TimePoint updated_at{};
  bool operator==(const Reflection&) const = default;
};

struct Appointment {
  std::string appointment_id;
  std::string learner_id;
  cases::CaseRef case_ref;
  TimePoint scheduled_for{};
  AppointmentStatus status = AppointmentStatus::scheduled;
  TimePoint created_at{};
  bool operator==(const Appointment&) const = default;
};

using json = nlohmann::json;

inline json to_json(const Goal& g) {
  return {{"goal_id", g.goal_id},
          {"learner_id", g.learner_id},
          {"text", g.text},
          {"target_element", g.target_element ? json(*g.target_element) : json(nullptr)},
          {"created_at", format_rfc3339(g.created_at)},
          {"status", to_string(g.status)}};
}

inline Goal goal_from_json(const json& j) {
  Goal g;
  g.goal_id = j.at("goal_id");
  g.learner_id = j.at("learner_id");
  g.text = j.at("text");
  if (j.contains("target_element") && !j["target_element"].is_null()) g.target_element = j["target_element"];
  g.created_at = parse_rfc3339(j.at("created_at").get<std::string>());
  g.status = parse_goal_status(j.at("status"));
  return g;
}

inline json to_json(const Reflection& r) {
  return {{"reflection_id", r.reflection_id}, {"learner_id", r.learner_id},
          {"session_id", r.session_id},       {"text", r.text},
          {"char_length", r.char_length},     {"created_at", format_rfc3339(r.created_at)},
          {"updated_at", format_rfc3339(r.updated_at)}};
}

inline Reflection reflection_from_json(const json& j) {
  Reflection r;
  r.reflection_id = j.at("reflection_id");
  r.learner_id = j.at("learner_id");
  r.session_id = j.at("session_id");
  r.text = j.at("text");
  r.char_length = j.at("char_length");
  r.created_at = parse_rfc3339(j.at("created_at").get<std::string>());
  r.updated_at = parse_rfc3339(j.at("updated_at").get<std::string>());
  return r;
}

inline json to_json(const Appointment& a) {
  return {{"appointment_id", a.appointment_id},
          {"learner_id", a.learner_id},
          {"case_id", a.case_ref.case_id},
          {"case_version", a.case_ref.version},
          {"scheduled_for", format_rfc3339(a.scheduled_for)},
          {"status", to_string(a.status)},
          {"created_at", format_rfc3339(a.created_at)}};
}

inline Appointment appointment_from_json(const json& j) {
  Appointment a;
  a.appointment_id = j.at("appointment_id");
  a.learner_id = j.at("learner_id");
  a.case_ref.case_id = j.at("case_id");
  a.case_ref.version = j.at("case_version");
  a.scheduled_for = parse_rfc3339(j.at("scheduled_for").get<std::string>());
  a.status = parse_appointment_status(j.at("status"));
  a.created_at = parse_rfc3339(j.at("created_at").get<std::string>());
  return a;
}

}  // namespace medsim::hub
