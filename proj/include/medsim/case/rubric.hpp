#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "medsim/case/types.hpp"
#include "medsim/core/error.hpp"

namespace medsim::cases {

struct RubricItem {
  std::string item_id;
  std::string title;
  std::map<int, std::string> anchors;       // score -> anchor text
  std::vector<std::string> applicability_tags;  // empty: applies to every case
};

struct RubricDefinition {
  std::string rubric_id;
  std::string title;
  int scale_min = 1;
  int scale_max = 5;
  std::vector<RubricItem> items;
  std::map<std::string, std::string> element_map;  // item_id -> Kalamazoo element

  const RubricItem* find_item(const std::string& id) const {
    for (const auto& it : items)
      if (it.item_id == id) return &it;
    return nullptr;
  }
};

// An item applies when it declares no tags or shares one with the case.
inline bool item_applies(const RubricItem& item, const std::vector<std::string>& case_tags) {
  if (item.applicability_tags.empty()) return true;
  for (const auto& t : item.applicability_tags)
    for (const auto& c : case_tags)
      if (t == c) return true;
  return false;
}

inline std::vector<std::string> validate_rubric(const RubricDefinition& r) {
  std::vector<std::string> problems;
  if (r.rubric_id.empty()) problems.push_back("rubric_id is empty");
  if (r.rubric_id == "MIRS" && r.items.size() != 28)
    problems.push_back("MIRS must have exactly 28 items, found " + std::to_string(r.items.size()));
  std::map<std::string, int> seen;
  for (const auto& it : r.items) {
    if (++seen[it.item_id] > 1) problems.push_back("duplicate item " + it.item_id);
    for (int s = r.scale_min; s <= r.scale_max; ++s)
      if (!it.anchors.count(s) || it.anchors.at(s).empty())
        problems.push_back(it.item_id + ": missing anchor for score " + std::to_string(s));
    for (const auto& [s, text] : it.anchors)
      if (s < r.scale_min || s > r.scale_max)
        problems.push_back(it.item_id + ": anchor outside scale " + std::to_string(s));
  }
  for (const auto& [item, element] : r.element_map) {
    if (!r.find_item(item)) problems.push_back("element map names unknown item " + item);
    if (!is_kalamazoo_element(element))
      problems.push_back("element map uses unknown element " + element);
  }
  return problems;
}

inline RubricDefinition rubric_from_yaml(const YAML::Node& root) {
  RubricDefinition r;
  try {
    r.rubric_id = root["rubric_id"].as<std::string>();
    r.title = root["title"] ? root["title"].as<std::string>() : r.rubric_id;
    if (auto scale = root["scale"]) {
      r.scale_min = scale["min"].as<int>();
      r.scale_max = scale["max"].as<int>();
    }
    for (const auto& n : root["items"]) {
      RubricItem it;
      it.item_id = n["id"].as<std::string>();
      it.title = n["title"].as<std::string>();
      for (const auto& a : n["anchors"]) it.anchors[a.first.as<int>()] = a.second.as<std::string>();
      if (n["applicability_tags"])
        it.applicability_tags = n["applicability_tags"].as<std::vector<std::string>>();
      r.items.push_back(std::move(it));
    }
  } catch (const YAML::Exception& e) {
    throw Error("invalid_rubric_file", std::string("rubric: ") + e.what());
  }
  return r;
}

// Attach an element map document ({rubric_id, elements: {item: element}}).
inline void load_element_map(RubricDefinition& r, const YAML::Node& root) {
  try {
    if (root["rubric_id"] && root["rubric_id"].as<std::string>() != r.rubric_id)
      throw Error("invalid_rubric_file", "element map is for rubric " +
                                             root["rubric_id"].as<std::string>());
    for (const auto& kv : root["elements"])
      r.element_map[kv.first.as<std::string>()] = kv.second.as<std::string>();
  } catch (const YAML::Exception& e) {
    throw Error("invalid_rubric_file", std::string("element map: ") + e.what());
  }
}

inline RubricDefinition load_rubric(const std::string& path,
                                    const std::optional<std::string>& element_map_path = {}) {
  RubricDefinition r;
  try {
    r = rubric_from_yaml(YAML::LoadFile(path));
    if (element_map_path) load_element_map(r, YAML::LoadFile(*element_map_path));
  } catch (const YAML::BadFile&) {
    throw Error("io_error", "cannot read rubric file " + path);
  }
  auto problems = validate_rubric(r);
  if (!problems.empty()) throw Error("invalid_rubric_file", path + ": " + problems.front());
  return r;
}

class RubricRegistry {
 public:
  void add(RubricDefinition r) {
    auto id = r.rubric_id;
    std::lock_guard lock(mu_);
    rubrics_[id] = std::make_shared<const RubricDefinition>(std::move(r));
  }
  std::shared_ptr<const RubricDefinition> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = rubrics_.find(id);
    return it == rubrics_.end() ? nullptr : it->second;
  }
  bool contains(const std::string& id) const { return find(id) != nullptr; }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const RubricDefinition>> rubrics_;
};

}  // namespace medsim::cases
