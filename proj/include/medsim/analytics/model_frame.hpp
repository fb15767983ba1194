#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "medsim/analytics/lagged.hpp"
#include "medsim/analytics/mixed_model.hpp"
#include "medsim/analytics/telemetry.hpp"
#include "medsim/core/error.hpp"

namespace medsim::analytics {

// Named columns over observations plus the learner and case grouping factors.
// Categorical predictors get treatment coding against their first level in
// sorted order; rows with a missing outcome or predictor are dropped.
class ModelFrame {
 public:
  using Column = std::variant<std::vector<double>, std::vector<std::string>>;

  void add_numeric(const std::string& name, std::vector<double> values) {
    check_size(values.size());
    columns_[name] = std::move(values);
  }
  void add_categorical(const std::string& name, std::vector<std::string> values) {
    check_size(values.size());
    columns_[name] = std::move(values);
  }
  void set_groups(std::vector<std::string> learners, std::vector<std::string> cases) {
    check_size(learners.size());
    check_size(cases.size());
    learners_ = std::move(learners);
    cases_ = std::move(cases);
  }

  std::size_t rows() const { return rows_.value_or(0); }
  bool has(const std::string& name) const { return columns_.count(name) > 0; }

  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : columns_) out.push_back(k);
    return out;
  }

  LmmData design(const std::string& outcome, const std::vector<std::string>& predictors) const {
    const auto& y_col = numeric(outcome);
    std::vector<bool> keep(rows(), true);
    for (std::size_t i = 0; i < rows(); ++i) keep[i] = std::isfinite(y_col[i]);
    for (const auto& p : predictors) {
      if (!has(p)) throw Error("unknown_column", "no column named '" + p + "'");
      if (const auto* v = std::get_if<std::vector<double>>(&columns_.at(p)))
        for (std::size_t i = 0; i < rows(); ++i) keep[i] = keep[i] && std::isfinite((*v)[i]);
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < rows(); ++i)
      if (keep[i]) idx.push_back(i);

    std::vector<std::string> names{"(Intercept)"};
    std::vector<std::vector<double>> cols{std::vector<double>(idx.size(), 1.0)};
    for (const auto& p : predictors) {
      const auto& col = columns_.at(p);
      if (const auto* v = std::get_if<std::vector<double>>(&col)) {
        std::vector<double> c;
        for (auto i : idx) c.push_back((*v)[i]);
        names.push_back(p);
        cols.push_back(std::move(c));
      } else {
        const auto& s = std::get<std::vector<std::string>>(col);
        std::set<std::string> levels;
        for (auto i : idx) levels.insert(s[i]);
        bool first = true;
        for (const auto& level : levels) {
          if (first) {
            first = false;
            continue;
          }
          std::vector<double> c;
          for (auto i : idx) c.push_back(s[i] == level ? 1.0 : 0.0);
          names.push_back(p + "[" + level + "]");
          cols.push_back(std::move(c));
        }
      }
    }
    LmmData d;
    d.fixed_names = names;
    d.y.resize(static_cast<Eigen::Index>(idx.size()));
    d.X.resize(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      d.y(static_cast<Eigen::Index>(r)) = y_col[idx[r]];
      for (std::size_t c = 0; c < cols.size(); ++c)
        d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cols[c][r];
    }
    d.learner = dense_index(learners_, idx);
    d.case_index = dense_index(cases_, idx);
    return d;
  }

 private:
  void check_size(std::size_t n) {
    if (rows_ && *rows_ != n) throw Error("invalid_input", "column length mismatch in model frame");
    rows_ = n;
  }

  const std::vector<double>& numeric(const std::string& name) const {
    auto it = columns_.find(name);
    if (it == columns_.end()) throw Error("unknown_column", "no column named '" + name + "'");
    const auto* v = std::get_if<std::vector<double>>(&it->second);
    if (!v) throw Error("invalid_argument", "outcome '" + name + "' must be numeric");
    return *v;
  }

  static std::vector<std::size_t> dense_index(const std::vector<std::string>& keys,
                                              const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> out;
    if (keys.empty()) return out;
    std::map<std::string, std::size_t> ids;
    for (auto i : idx) ids.emplace(keys[i], 0);
    std::size_t next = 0;
    for (auto& [k, v] : ids) v = next++;
    for (auto i : idx) out.push_back(ids.at(keys[i]));
    return out;
  }

  std::map<std::string, Column> columns_;
  std::vector<std::string> learners_, cases_;
  std::optional<std::size_t> rows_;
};

// Session-level frame. `session_count` is the number of completed,
// non-excluded sessions the learner had as of each observation (inclusive).
inline ModelFrame frame_from_telemetry(const std::vector<TelemetryRow>& all_rows) {
  auto rows = included(all_rows);
  std::map<std::string, std::vector<std::size_t>> by_learner;
  for (std::size_t i = 0; i < rows.size(); ++i) by_learner[rows[i].learner_id].push_back(i);
  std::vector<double> session_count(rows.size(), 0.0);
  for (auto& [l, ids] : by_learner) {
    std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) {
      return rows[a].completed_at < rows[b].completed_at;
    });
    for (std::size_t k = 0; k < ids.size(); ++k) session_count[ids[k]] = static_cast<double>(k + 1);
  }
  std::vector<double> duration, turns, checklist, mirs, reflection;
  std::vector<std::string> institution, case_id, modality, learners;
  for (const auto& r : rows) {
    duration.push_back(r.duration_minutes);
    turns.push_back(r.turn_count);
    checklist.push_back(r.checklist_completion_pct);
    mirs.push_back(r.mirs_overall);
    reflection.push_back(static_cast<double>(r.reflection_char_length));
    institution.push_back(r.institution_id);
    case_id.push_back(r.case_id);
    modality.push_back(to_string(r.modality));
    learners.push_back(r.learner_id);
  }
  ModelFrame f;
  f.add_numeric("duration_minutes", std::move(duration));
  f.add_numeric("turn_count", std::move(turns));
  f.add_numeric("checklist_completion_pct", std::move(checklist));
  f.add_numeric("mirs_overall", std::move(mirs));
  f.add_numeric("reflection_char_length", std::move(reflection));
  f.add_numeric("session_count", std::move(session_count));
  f.add_categorical("institution_id", institution);
  f.add_categorical("case_id", case_id);
  f.add_categorical("modality", std::move(modality));
  f.set_groups(std::move(learners), std::move(case_id));
  return f;
}

inline ModelFrame frame_from_lagged(const std::vector<LaggedChange>& changes) {
  std::vector<double> reflection, turns, duration, mirs, delta, index;
  std::vector<std::string> institution, case_id, modality, learners;
  for (const auto& c : changes) {
    reflection.push_back(c.reflection_char_length);
    turns.push_back(c.turn_count);
    duration.push_back(c.duration_minutes);
    mirs.push_back(c.mirs);
    delta.push_back(c.delta_mirs);
    index.push_back(static_cast<double>(c.session_index));
    institution.push_back(c.institution_id);
    case_id.push_back(c.case_id);
    modality.push_back(to_string(c.modality));
    learners.push_back(c.learner_id);
  }
  ModelFrame f;
  f.add_numeric("reflection_char_length", std::move(reflection));
  f.add_numeric("turn_count", std::move(turns));
  f.add_numeric("duration_minutes", std::move(duration));
  f.add_numeric("mirs_overall", std::move(mirs));
  f.add_numeric("delta_mirs", std::move(delta));
  f.add_numeric("session_count", std::move(index));
  f.add_categorical("institution_id", institution);
  f.add_categorical("case_id", case_id);
  f.add_categorical("modality", std::move(modality));
  f.set_groups(std::move(learners), std::move(case_id));
  return f;
}

}  // namespace medsim::analytics
