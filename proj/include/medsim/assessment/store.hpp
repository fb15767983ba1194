#pragma once

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "medsim/assessment/report.hpp"
#include "medsim/core/error.hpp"

namespace medsim::assessment {

// Reports are immutable once stored; one per session.
class ReportStore {
 public:
  std::shared_ptr<const AssessmentReport> put(AssessmentReport r) {
    std::unique_lock lock(mu_);
    auto [it, inserted] = reports_.try_emplace(r.session_id, nullptr);
    if (!inserted) throw Error("report_exists", "a report for " + r.session_id + " is already stored");
    it->second = std::make_shared<const AssessmentReport>(std::move(r));
    return it->second;
  }

  std::shared_ptr<const AssessmentReport> find(const std::string& session_id) const {
    std::shared_lock lock(mu_);
    auto it = reports_.find(session_id);
    return it == reports_.end() ? nullptr : it->second;
  }

  std::shared_ptr<const AssessmentReport> get(const std::string& session_id) const {
    auto r = find(session_id);
    if (!r) throw Error("report_not_ready", "no report for session " + session_id);
    return r;
  }

  bool contains(const std::string& session_id) const { return find(session_id) != nullptr; }

  std::vector<std::shared_ptr<const AssessmentReport>> all() const {
    std::shared_lock lock(mu_);
    std::vector<std::shared_ptr<const AssessmentReport>> out;
    for (const auto& [k, v] : reports_) out.push_back(v);
    return out;
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const AssessmentReport>> reports_;
};

}  // namespace medsim::assessment
