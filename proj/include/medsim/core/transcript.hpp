#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "medsim/core/error.hpp"

namespace medsim {

enum class Role { student, patient, system };

inline std::string to_string(Role r) {
  switch (r) {
    case Role::student: return "student";
    case Role::patient: return "patient";
    case Role::system: return "system";
  }
  return "?";
}

inline Role parse_role(std::string_view s) {
  if (s == "student") return Role::student;
  if (s == "patient") return Role::patient;
  if (s == "system") return Role::system;
  throw Error("invalid_argument", "unknown role '" + std::string(s) + "'");
}

struct Utterance {
  Role role = Role::student;
  std::string content;
  bool operator==(const Utterance&) const = default;
};

using Transcript = std::vector<Utterance>;

// One utterance per line as "[n] STUDENT: text"; embedded line breaks become spaces.
inline std::string render_transcript(const Transcript& t) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::string body = t[i].content;
    for (auto& c : body)
      if (c == '\n' || c == '\r') c = ' ';
    out += "[" + std::to_string(i + 1) + "] " + (t[i].role == Role::student ? "STUDENT" : t[i].role == Role::patient ? "PATIENT" : "SYSTEM") +
           ": " + body + "\n";
  }
  return out;
}

}  // namespace medsim
