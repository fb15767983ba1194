#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

#include "medsim/assessment/checklist.hpp"
#include "medsim/assessment/grounding.hpp"
#include "medsim/assessment/report.hpp"
#include "medsim/case/prompt.hpp"
#include "medsim/case/rubric.hpp"
#include "medsim/core/clock.hpp"
#include "medsim/llm/structured.hpp"
#include "medsim/session/session.hpp"

namespace medsim::assessment {

struct AssessOptions {
  int max_parallel = 8;
  bool exclude_failed_checklist = false;  // default: a failed item counts as not assessed
  llm::ScoreOptions score;
  std::string overall_rubric = "MIRS";
};

// Runs `tasks` on up to `width` threads.
inline void run_parallel(std::vector<std::function<void()>>& tasks, int width) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) tasks[i]();
  };
  int n = std::max(1, std::min<int>(width, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

class AssessmentPipeline {
 public:
  AssessmentPipeline(const cases::RubricRegistry& rubrics, llm::ChatProvider& provider, ChecklistEvaluator& checklist,
                     const Clock& clock, AssessOptions options = {})
      : rubrics_(rubrics), provider_(provider), checklist_(checklist), clock_(clock), options_(std::move(options)) {}

  AssessmentReport assess(const session::Session& s, const cases::CaseDefinition& def) {
    if (s.state != session::SessionState::completed)
      throw Error("session_not_completed", s.session_id + " is " + session::to_string(s.state));
    if (s.case_id != def.case_id || s.case_version != def.version)
      throw Error("invalid_argument", "case does not match the session");
    llm::Stopwatch watch;
    const auto transcript = s.transcript();

    AssessmentReport report;
    report.session_id = s.session_id;
    report.case_id = def.case_id;
    report.case_version = def.version;
    report.transcript_hash = session::transcript_hash(s);

    std::vector<std::shared_ptr<const cases::RubricDefinition>> attached;
    for (const auto& id : def.rubric_ids) {
      auto r = rubrics_.find(id);
      if (!r) throw Error("unknown_rubric", "rubric " + id + " is not registered");
      attached.push_back(r);
      for (const auto& item : r->items) {
        ItemScore score;
        score.rubric_id = r->rubric_id;
        score.item_id = item.item_id;
        report.rubric_scores.push_back(std::move(score));
      }
    }
    report.checklist_results.resize(def.checklist.size());

    std::vector<std::function<void()>> tasks;
    std::size_t k = 0;
    for (const auto& r : attached) {
      for (const auto& item : r->items) {
        auto* out = &report.rubric_scores[k++];
        if (!cases::item_applies(item, def.tags)) {
          out->not_applicable = true;
          continue;
        }
        if (transcript.empty()) {
          out->score = r->scale_min;
          out->justification = "No interview took place.";
          continue;
        }
        tasks.push_back([this, r, &item, out, &transcript] {
          auto opt = options_.score;
          opt.scale_min = r->scale_min;
          opt.scale_max = r->scale_max;
          auto raw = llm::score_item(provider_, cases::render_item_scoring_prompt(*r, item.item_id, transcript), opt);
          out->diagnostics = raw.diagnostics;
          if (raw.status != llm::ItemStatus::ok) {
            out->failed = true;
            out->diagnostics.push_back("status=" + llm::to_string(raw.status));
            return;
          }
          out->score = raw.score;
          out->not_applicable = raw.not_applicable;
          out->justification = raw.justification;
          out->quotes = raw.quotes;
        });
      }
    }
    for (std::size_t i = 0; i < def.checklist.size(); ++i) {
      auto* out = &report.checklist_results[i];
      const auto* item = &def.checklist[i];
      if (transcript.empty()) {
        *out = ChecklistResult{item->item_id, item->required};
        continue;
      }
      tasks.push_back([this, out, item, &def, &transcript] { *out = checklist_.evaluate(*item, def, transcript); });
    }
    run_parallel(tasks, options_.max_parallel);

    for (const auto& s : report.rubric_scores)
      if (s.failed) report.failed_items.push_back(item_key(s));
    for (const auto& c : report.checklist_results)
      if (c.failed) report.failed_items.push_back("checklist:" + c.item_id);
    report.complete = report.failed_items.empty();
    report.checklist_completion_pct = checklist_completion(report.checklist_results, options_.exclude_failed_checklist);
    report.mirs_overall = rubric_mean(report.rubric_scores, options_.overall_rubric);
    std::map<std::string, std::string> element_map;
    for (const auto& r : attached) element_map.insert(r->element_map.begin(), r->element_map.end());
    report.element_aggregates = aggregate_elements(report.rubric_scores, element_map);
    verify_grounding(report, transcript);
    report.generated_at = clock_.now();
    report.generation_latency_ms = watch.elapsed_ms();
    return report;
  }

 private:
  const cases::RubricRegistry& rubrics_;
  llm::ChatProvider& provider_;
  ChecklistEvaluator& checklist_;
  const Clock& clock_;
  AssessOptions options_;
};

}  // namespace medsim::assessment
