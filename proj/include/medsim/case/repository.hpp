#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "medsim/case/types.hpp"
#include "medsim/case/validate.hpp"
#include "medsim/core/error.hpp"

namespace medsim::cases {

// Versioned, immutable case store. Publishing content that differs from the
// latest version creates version latest+1; identical content returns the
// existing version. Published versions are never modified.
class CaseRepository {
 public:
  using Ptr = std::shared_ptr<const CaseDefinition>;

  explicit CaseRepository(ValidationLimits limits = {}, const RubricRegistry* rubrics = nullptr)
      : limits_(limits), rubrics_(rubrics) {}

  Ptr publish(CaseDefinition def) {
    require_valid(def, limits_, rubrics_);
    std::unique_lock lock(mu_);
    auto& versions = cases_[def.case_id];
    if (!versions.empty()) {
      CaseDefinition probe = def;
      probe.version = versions.back()->version;
      if (probe == *versions.back()) return versions.back();
    }
    def.version = versions.empty() ? 1 : versions.back()->version + 1;
    versions.push_back(std::make_shared<const CaseDefinition>(std::move(def)));
    return versions.back();
  }

  // Re-inserts a stored version verbatim (event replay).
  void restore(CaseDefinition def) {
    std::unique_lock lock(mu_);
    auto& versions = cases_[def.case_id];
    if (!versions.empty() && versions.back()->version >= def.version)
      throw Error("invalid_event", "case " + def.case_id + " version " + std::to_string(def.version) +
                                       " is not newer than the stored one");
    versions.push_back(std::make_shared<const CaseDefinition>(std::move(def)));
  }

  Ptr get(const std::string& case_id, int version = 0) const {
    std::shared_lock lock(mu_);
    auto it = cases_.find(case_id);
    if (it == cases_.end() || it->second.empty()) throw Error("unknown_case", "no case " + case_id);
    if (version == 0) return it->second.back();
    for (const auto& c : it->second)
      if (c->version == version) return c;
    throw Error("unknown_case", "case " + case_id + " has no version " + std::to_string(version));
  }

  bool contains(const std::string& case_id) const {
    std::shared_lock lock(mu_);
    return cases_.count(case_id) > 0;
  }

  std::vector<Ptr> latest() const {
    std::shared_lock lock(mu_);
    std::vector<Ptr> out;
    for (const auto& [id, versions] : cases_) out.push_back(versions.back());
    return out;
  }

  std::vector<Ptr> versions(const std::string& case_id) const {
    std::shared_lock lock(mu_);
    auto it = cases_.find(case_id);
    return it == cases_.end() ? std::vector<Ptr>{} : it->second;
  }

  const ValidationLimits& limits() const { return limits_; }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::vector<Ptr>> cases_;
  ValidationLimits limits_;
  const RubricRegistry* rubrics_;
};

}  // namespace medsim::cases
