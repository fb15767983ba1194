#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "medsim/core/error.hpp"
#include "medsim/llm/http.hpp"

namespace medsim::service {

struct RubricFiles {
  std::string path;
  std::optional<std::string> element_map;
};

// Startup configuration. Credentials are referenced by environment variable
// name; their values are read at use and never stored here.
struct DeploymentConfig {
  std::string provider = "mock";  // mock | live
  llm::HttpProviderConfig live;
  std::optional<std::string> patient_script;  // mock small talk rules
  std::string checklist_evaluator = "keyword";  // keyword | provider
  int max_duration_minutes = 30;
  int parse_retries = 2;
  int max_parallel_scoring = 8;
  std::vector<RubricFiles> rubrics;
  std::vector<std::string> seed_cases;  // published at startup when absent
  std::string data_dir = "var";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string admin_token_env = "MEDSIM_ADMIN_TOKEN";
  int snapshot_every = 500;  // events between snapshots; 0 disables
  bool fsync = true;
  std::string source_dir = ".";  // for resolving relative paths
};

namespace detail {

inline std::string resolve(const std::string& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = std::filesystem::path(base) / path;
  return path.lexically_normal().string();
}

}  // namespace detail

inline std::vector<std::string> validate_config(const DeploymentConfig& c) {
  std::vector<std::string> problems;
  if (c.provider != "mock" && c.provider != "live") problems.push_back("provider must be 'mock' or 'live'");
  if (c.checklist_evaluator != "keyword" && c.checklist_evaluator != "provider")
    problems.push_back("checklist_evaluator must be 'keyword' or 'provider'");
  if (c.provider == "live") {
    if (c.live.endpoint.empty()) problems.push_back("live.endpoint is required");
    if (c.live.api_key_env.empty()) problems.push_back("live.api_key_env is required");
    else if (!std::getenv(c.live.api_key_env.c_str()))
      problems.push_back("environment variable " + c.live.api_key_env + " is not set");
  }
  if (c.max_duration_minutes < 1) problems.push_back("max_duration_minutes must be at least 1");
  if (c.parse_retries < 0) problems.push_back("retries.parse must be non-negative");
  if (c.live.retries < 0) problems.push_back("retries.provider must be non-negative");
  if (c.max_parallel_scoring < 1) problems.push_back("max_parallel_scoring must be at least 1");
  if (c.rubrics.empty()) problems.push_back("at least one rubric file is required");
  if (c.data_dir.empty()) problems.push_back("data_dir is required");
  if (c.port < 0 || c.port > 65535) problems.push_back("listen.port out of range");
  if (c.snapshot_every < 0) problems.push_back("snapshot_every must be non-negative");
  return problems;
}

inline DeploymentConfig config_from_yaml(const YAML::Node& root, const std::string& base_dir) {
  DeploymentConfig c;
  c.source_dir = base_dir;
  try {
    if (root["provider"]) c.provider = root["provider"].as<std::string>();
    if (auto l = root["live"]) {
      if (l["endpoint"]) c.live.endpoint = l["endpoint"].as<std::string>();
      if (l["model"]) c.live.model = l["model"].as<std::string>();
      if (l["api_key_env"]) c.live.api_key_env = l["api_key_env"].as<std::string>();
      if (l["timeout_ms"]) c.live.timeout_ms = l["timeout_ms"].as<int>();
      if (l["max_concurrency"]) c.live.max_concurrency = l["max_concurrency"].as<int>();
    }
    if (root["patient_script"]) c.patient_script = detail::resolve(base_dir, root["patient_script"].as<std::string>());
    if (root["checklist_evaluator"]) c.checklist_evaluator = root["checklist_evaluator"].as<std::string>();
    if (root["max_duration_minutes"]) c.max_duration_minutes = root["max_duration_minutes"].as<int>();
    if (auto r = root["retries"]) {
      if (r["parse"]) c.parse_retries = r["parse"].as<int>();
      if (r["provider"]) c.live.retries = r["provider"].as<int>();
      if (r["backoff_ms"]) c.live.backoff_ms = r["backoff_ms"].as<int>();
    }
    if (root["max_parallel_scoring"]) c.max_parallel_scoring = root["max_parallel_scoring"].as<int>();
    for (const auto& r : root["rubrics"]) {
      RubricFiles f;
      f.path = detail::resolve(base_dir, r["path"].as<std::string>());
      if (r["element_map"]) f.element_map = detail::resolve(base_dir, r["element_map"].as<std::string>());
      c.rubrics.push_back(f);
    }
    for (const auto& s : root["seed_cases"]) c.seed_cases.push_back(detail::resolve(base_dir, s.as<std::string>()));
    if (root["data_dir"]) c.data_dir = detail::resolve(base_dir, root["data_dir"].as<std::string>());
    if (auto l = root["listen"]) {
      if (l["host"]) c.host = l["host"].as<std::string>();
      if (l["port"]) c.port = l["port"].as<int>();
    }
    if (auto a = root["auth"])
      if (a["admin_token_env"]) c.admin_token_env = a["admin_token_env"].as<std::string>();
    if (root["snapshot_every"]) c.snapshot_every = root["snapshot_every"].as<int>();
    if (root["fsync"]) c.fsync = root["fsync"].as<bool>();
  } catch (const YAML::Exception& e) {
    throw Error("invalid_config", e.what());
  }
  return c;
}

inline DeploymentConfig load_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw Error("invalid_config", "cannot read " + path);
  } catch (const YAML::Exception& e) {
    throw Error("invalid_config", path + ": " + e.what());
  }
  auto c = config_from_yaml(root, std::filesystem::path(path).parent_path().string());
  auto problems = validate_config(c);
  if (!problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw Error("invalid_config", msg);
  }
  return c;
}

// One-line startup summary. Mentions credential variables by name only.
inline std::string describe(const DeploymentConfig& c) {
  std::ostringstream out;
  out << "provider=" << c.provider;
  if (c.provider == "live") out << " endpoint=" << c.live.endpoint << " model=" << c.live.model
                                << " key_from=$" << c.live.api_key_env;
  out << " data_dir=" << c.data_dir << " listen=" << c.host << ":" << c.port
      << " max_duration=" << c.max_duration_minutes << "min rubrics=" << c.rubrics.size()
      << " admin_token=" << (std::getenv(c.admin_token_env.c_str()) ? "$" + c.admin_token_env : "unset");
  return out.str();
}

}  // namespace medsim::service
