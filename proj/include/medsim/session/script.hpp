#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "medsim/core/error.hpp"
#include "medsim/core/modality.hpp"

namespace medsim::session {

// Scripted student for headless encounters.
struct EncounterScript {
  std::string case_path;  // resolved against the script's directory
  std::string learner_id = "scripted-learner";
  Modality modality = Modality::text;
  std::vector<std::string> turns;
  int minutes_per_turn = 1;  // simulated time between student turns
};

inline EncounterScript load_encounter_script(const std::string& path) {
  EncounterScript s;
  try {
    auto root = YAML::LoadFile(path);
    if (root["case"]) {
      std::filesystem::path p = root["case"].as<std::string>();
      if (p.is_relative()) p = std::filesystem::path(path).parent_path() / p;
      s.case_path = p.lexically_normal().string();
    }
    if (root["learner_id"]) s.learner_id = root["learner_id"].as<std::string>();
    if (root["modality"]) s.modality = parse_modality(root["modality"].as<std::string>());
    if (root["minutes_per_turn"]) s.minutes_per_turn = root["minutes_per_turn"].as<int>();
    for (const auto& t : root["turns"]) s.turns.push_back(t.as<std::string>());
  } catch (const YAML::BadFile&) {
    throw Error("io_error", "cannot read script " + path);
  } catch (const YAML::Exception& e) {
    throw Error("invalid_script", path + ": " + e.what());
  }
  if (s.turns.empty()) throw Error("invalid_script", path + ": no turns");
  return s;
}

}  // namespace medsim::session
