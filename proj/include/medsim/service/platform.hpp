#pragma once

#include <openssl/crypto.h>

#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "medsim/analytics/telemetry.hpp"
#include "medsim/assessment/pipeline.hpp"
#include "medsim/assessment/store.hpp"
#include "medsim/case/io.hpp"
#include "medsim/case/repository.hpp"
#include "medsim/hub/hub.hpp"
#include "medsim/llm/http.hpp"
#include "medsim/llm/mock.hpp"
#include "medsim/service/auth.hpp"
#include "medsim/service/config.hpp"
#include "medsim/service/event_log.hpp"
#include "medsim/session/engine.hpp"
#include "medsim/session/telemetry.hpp"

namespace medsim::service {

// Every store of the deployment behind one event log. Each change is
// appended to the log as it happens; open() rebuilds the stores from the
// latest snapshot plus the events after it.
class Platform : private session::SessionObserver {
 public:
  enum class ReportState { pending, ready, none, failed };
  struct ReportLookup {
    ReportState state = ReportState::none;
    std::shared_ptr<const assessment::AssessmentReport> report;
    std::string error;
  };
  struct Published {
    cases::CaseRepository::Ptr def;
    bool created = false;
  };

  Platform(DeploymentConfig cfg, std::shared_ptr<llm::ChatProvider> provider, const Clock& clock)
      : cfg_(std::move(cfg)),
        provider_(std::move(provider)),
        clock_(clock),
        repo_(cases::ValidationLimits{cfg_.max_duration_minutes}, &rubrics_),
        engine_(repo_, *provider_, clock_),
        hub_(repo_, engine_, reports_, clock_),
        log_(cfg_.data_dir, cfg_.fsync) {
    if (cfg_.checklist_evaluator == "provider")
      evaluator_ = std::make_unique<assessment::ProviderChecklistEvaluator>(*provider_, cfg_.parse_retries);
    else
      evaluator_ = std::make_unique<assessment::KeywordChecklistEvaluator>();
  }

  ~Platform() { close(); }
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  static std::shared_ptr<llm::ChatProvider> make_provider(const DeploymentConfig& c) {
    if (c.provider == "live") return std::make_shared<llm::HttpChatProvider>(c.live);
    llm::PatientScript script;
    if (c.patient_script) script = llm::load_patient_script(*c.patient_script);
    return std::make_shared<llm::MockProvider>(std::move(script));
  }

  // Loads rubrics, replays the log, publishes seed cases and starts the
  // assessment worker. Completed sessions without a report are re-queued.
  void open() {
    replay(true);
    engine_.set_observer(this);
    for (const auto& path : cfg_.seed_cases) publish_case(cases::load_case_file(path));
    worker_ = std::thread([this] { work(); });
    for (const auto& s : engine_.sessions())
      if (s.state == session::SessionState::completed && !reports_.contains(s.session_id)) enqueue(s.session_id);
  }

  // Rebuilds the stores without starting anything or writing to the log.
  void open_read_only() { replay(false); }

  void close() {
    {
      std::lock_guard lock(queue_mu_);
      if (stopping_) return;
      stopping_ = true;
    }
    queue_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  struct ReplayInfo {
    bool from_snapshot = false;
    std::size_t events = 0;
    bool dropped_torn_tail = false;
  };
  const ReplayInfo& replay_info() const { return replay_info_; }

  // ---- cases ----

  Published publish_case(cases::CaseDefinition def) {
    std::shared_lock state(state_mu_);
    std::lock_guard lock(publish_mu_);
    const auto before = repo_.contains(def.case_id) ? repo_.get(def.case_id)->version : 0;
    auto ptr = repo_.publish(std::move(def));
    const bool created = ptr->version != before;
    if (created) log_.append("case_published", {{"case", cases::to_json(*ptr)}}, clock_.now());
    return {ptr, created};
  }

  // ---- sessions ----

  session::Session start_session(const std::string& learner, const cases::CaseRef& ref, Modality m) {
    std::shared_lock state(state_mu_);
    return engine_.start_session(learner, ref, m);
  }
  session::Turn submit_turn(const std::string& id, const std::string& text) {
    std::shared_lock state(state_mu_);
    return engine_.submit_turn(id, text);
  }
  session::Turn retry_reply(const std::string& id) {
    std::shared_lock state(state_mu_);
    return engine_.retry_reply(id);
  }
  session::Session complete_session(const std::string& id) {
    std::shared_lock state(state_mu_);
    return engine_.complete_session(id);
  }
  session::Session abort_session(const std::string& id) {
    std::shared_lock state(state_mu_);
    return engine_.abort_session(id);
  }

  ReportLookup report(const std::string& session_id) const {
    auto s = engine_.get(session_id);
    if (auto r = reports_.find(session_id)) return {ReportState::ready, r, {}};
    if (s.state == session::SessionState::aborted) return {ReportState::none, nullptr, "session was aborted"};
    if (s.state == session::SessionState::active) return {ReportState::none, nullptr, "session is still active"};
    std::lock_guard lock(queue_mu_);
    if (auto it = failed_.find(session_id); it != failed_.end()) return {ReportState::failed, nullptr, it->second};
    return {ReportState::pending, nullptr, {}};
  }

  // ---- learning hub ----

  hub::Goal set_goal(const std::string& learner, const std::string& text, const std::optional<std::string>& element) {
    std::shared_lock state(state_mu_);
    std::lock_guard lock(artifact_mu_);
    auto g = hub_.set_goal(learner, text, element);
    log_.append("goal_set", {{"goal", hub::to_json(g)}}, clock_.now());
    return g;
  }
  hub::Goal set_goal_status(const std::string& learner, const std::string& goal_id, hub::GoalStatus st) {
    std::shared_lock state(state_mu_);
    std::lock_guard lock(artifact_mu_);
    auto g = hub_.set_goal_status(learner, goal_id, st);
    log_.append("goal_set", {{"goal", hub::to_json(g)}}, clock_.now());
    return g;
  }
  hub::Reflection record_reflection(const std::string& learner, const std::string& session_id, const std::string& t) {
    std::shared_lock state(state_mu_);
    std::lock_guard lock(artifact_mu_);
    auto r = hub_.record_reflection(learner, session_id, t);
    log_.append("reflection_recorded", {{"reflection", hub::to_json(r)}}, clock_.now());
    return r;
  }
  hub::Appointment schedule(const std::string& learner, const cases::CaseRef& ref, TimePoint when) {
    std::shared_lock state(state_mu_);
    std::lock_guard lock(artifact_mu_);
    auto a = hub_.schedule(learner, ref, when);
    log_.append("appointment_set", {{"appointment", hub::to_json(a)}}, clock_.now());
    return a;
  }
  hub::Appointment set_appointment_status(const std::string& learner, const std::string& id,
                                          hub::AppointmentStatus st) {
    std::shared_lock state(state_mu_);
    std::lock_guard lock(artifact_mu_);
    auto a = hub_.set_appointment_status(learner, id, st);
    log_.append("appointment_set", {{"appointment", hub::to_json(a)}}, clock_.now());
    return a;
  }

  // ---- analytics ----

  // One row per terminal session; aborted or unscored sessions are flagged excluded.
  std::vector<analytics::TelemetryRow> telemetry() const {
    std::vector<analytics::TelemetryRow> rows;
    for (const auto& s : engine_.sessions()) {
      if (!s.terminal()) continue;
      std::optional<session::ScoredOutcome> scored;
      if (auto r = reports_.find(s.session_id)) {
        session::ScoredOutcome o;
        o.checklist_completion_pct = r->checklist_completion_pct;
        if (r->mirs_overall) o.mirs_overall = *r->mirs_overall;
        scored = o;
      }
      rows.push_back(session::telemetry_row(s, scored, hub_.reflection_length(s.session_id)));
    }
    return rows;
  }

  // ---- auth ----

  std::string mint_token(Role role, const std::string& subject) {
    if (role == Role::learner && text::trim(subject).empty())
      throw Error("invalid_request", "learner tokens need a learner id");
    std::shared_lock state(state_mu_);
    auto token = random_token();
    auto digest = sha256_hex(token);
    Principal p{role, subject};
    tokens_.add_hashed(digest, p);
    log_.append("token_minted", {{"digest", digest}, {"role", to_string(role)}, {"subject", subject}}, clock_.now());
    return token;
  }

  std::optional<Principal> authenticate(const std::string& token) const {
    if (token.empty()) return std::nullopt;
    if (const char* admin = std::getenv(cfg_.admin_token_env.c_str()); admin && *admin) {
      const auto a = sha256_hex(admin), t = sha256_hex(token);
      if (CRYPTO_memcmp(a.data(), t.data(), a.size()) == 0) return Principal{Role::admin, "admin"};
    }
    return tokens_.lookup(token);
  }

  // ---- maintenance ----

  // Completes sessions past their deadline and snapshots when due.
  void tick() {
    {
      std::shared_lock state(state_mu_);
      engine_.expire_due();
    }
    if (cfg_.snapshot_every > 0 && log_.since_snapshot() >= cfg_.snapshot_every) snapshot();
  }

  void snapshot() {
    std::unique_lock state(state_mu_);
    log_.write_snapshot(state_json_locked(), log_.last_id());
  }

  // Blocks until the assessment queue is empty.
  void wait_idle() const {
    std::unique_lock lock(queue_mu_);
    idle_cv_.wait(lock, [this] { return queue_.empty() && !working_; });
  }

  // Canonical dump of every store, used for snapshots and equality checks.
  json state() const {
    std::unique_lock state(state_mu_);
    return state_json_locked();
  }

  const DeploymentConfig& config() const { return cfg_; }
  const cases::CaseRepository& cases() const { return repo_; }
  const cases::RubricRegistry& rubrics() const { return rubrics_; }
  const session::SessionEngine& sessions() const { return engine_; }
  const hub::LearningHub& hub() const { return hub_; }
  const assessment::ReportStore& reports() const { return reports_; }
  const EventLog& log() const { return log_; }
  const Clock& clock() const { return clock_; }

 private:
  // ---- observer: called with the session lock held ----
  void session_started(const session::Session& s) override {
    log_.append("session_started", {{"session", session::to_json(s, true)}}, clock_.now());
  }
  void turn_added(const session::Session& s, const session::Turn& t) override {
    log_.append("turn_added", {{"session_id", s.session_id}, {"turn", session::to_json(t)}}, clock_.now());
  }
  void session_ended(const session::Session& s) override {
    const bool done = s.state == session::SessionState::completed;
    log_.append(done ? "session_completed" : "session_aborted",
                {{"session_id", s.session_id},
                 {"state", session::to_string(s.state)},
                 {"ended_at", format_rfc3339(*s.ended_at)},
                 {"end_reason", s.end_reason}},
                clock_.now());
    if (done) enqueue(s.session_id);
  }

  // ---- replay ----
  void replay(bool repair) {
    for (const auto& r : cfg_.rubrics) rubrics_.add(cases::load_rubric(r.path, r.element_map));
    auto loaded = log_.load(repair);
    replay_info_ = {loaded.snapshot.has_value(), loaded.events.size(), loaded.dropped_torn_tail};
    if (loaded.snapshot) restore_state(*loaded.snapshot);
    for (const auto& e : loaded.events) apply(e);
  }

  void apply(const EventRecord& e) {
    const auto& p = e.payload;
    try {
      if (e.kind == "case_published") {
        repo_.restore(cases::case_from_json(p.at("case")));
      } else if (e.kind == "session_started") {
        engine_.restore_started(session::session_from_json(p.at("session")));
      } else if (e.kind == "turn_added") {
        engine_.restore_turn(p.at("session_id"), session::turn_from_json(p.at("turn")));
      } else if (e.kind == "session_completed" || e.kind == "session_aborted") {
        engine_.restore_end(p.at("session_id"), session::parse_state(p.at("state")),
                            parse_rfc3339(p.at("ended_at").get<std::string>()), p.at("end_reason"));
      } else if (e.kind == "report_generated") {
        reports_.put(assessment::report_from_json(p.at("report")));
      } else if (e.kind == "goal_set") {
        hub_.restore(hub::goal_from_json(p.at("goal")));
      } else if (e.kind == "reflection_recorded") {
        hub_.restore(hub::reflection_from_json(p.at("reflection")));
      } else if (e.kind == "appointment_set") {
        hub_.restore(hub::appointment_from_json(p.at("appointment")));
      } else if (e.kind == "token_minted") {
        tokens_.add_hashed(p.at("digest"), {parse_role(p.at("role")), p.at("subject")});
      } else {
        throw Error("corrupt_log", "unknown event kind '" + e.kind + "'");
      }
    } catch (const Error& err) {
      throw Error("corrupt_log", "event " + std::to_string(e.event_id) + " (" + e.kind + "): " + err.what());
    } catch (const json::exception& err) {
      throw Error("corrupt_log", "event " + std::to_string(e.event_id) + " (" + e.kind + "): " + err.what());
    }
  }

  json state_json_locked() const {
    json cases = json::array();
    for (const auto& latest : repo_.latest())
      for (const auto& v : repo_.versions(latest->case_id)) cases.push_back(cases::to_json(*v));
    json sessions = json::array();
    for (const auto& s : engine_.sessions()) sessions.push_back(session::to_json(s, true));
    json reports = json::array();
    for (const auto& r : reports_.all()) reports.push_back(assessment::to_json(*r));
    json goals = json::array();
    for (const auto& g : hub_.all_goals()) goals.push_back(hub::to_json(g));
    json reflections = json::array();
    for (const auto& r : hub_.reflections()) reflections.push_back(hub::to_json(r));
    json appointments = json::array();
    for (const auto& a : hub_.all_appointments()) appointments.push_back(hub::to_json(a));
    json tokens = json::array();
    for (const auto& [digest, p] : tokens_.all())
      tokens.push_back({{"digest", digest}, {"role", to_string(p.role)}, {"subject", p.subject}});
    return {{"cases", cases},     {"sessions", sessions},         {"reports", reports},  {"goals", goals},
            {"reflections", reflections}, {"appointments", appointments}, {"tokens", tokens}};
  }

  void restore_state(const json& s) {
    for (const auto& c : s.at("cases")) repo_.restore(cases::case_from_json(c));
    for (const auto& j : s.at("sessions")) engine_.restore_started(session::session_from_json(j));
    for (const auto& r : s.at("reports")) reports_.put(assessment::report_from_json(r));
    for (const auto& g : s.at("goals")) hub_.restore(hub::goal_from_json(g));
    for (const auto& r : s.at("reflections")) hub_.restore(hub::reflection_from_json(r));
    for (const auto& a : s.at("appointments")) hub_.restore(hub::appointment_from_json(a));
    for (const auto& t : s.at("tokens")) tokens_.add_hashed(t.at("digest"), {parse_role(t.at("role")), t.at("subject")});
  }

  // ---- assessment worker ----
  void enqueue(const std::string& session_id) {
    {
      std::lock_guard lock(queue_mu_);
      queue_.push_back(session_id);
    }
    queue_cv_.notify_one();
  }

  void work() {
    for (;;) {
      std::string id;
      {
        std::unique_lock lock(queue_mu_);
        queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        id = queue_.front();
        queue_.pop_front();
        working_ = true;
      }
      try {
        auto s = engine_.get(id);
        if (!reports_.contains(id)) {
          assessment::AssessOptions opt;
          opt.max_parallel = cfg_.max_parallel_scoring;
          opt.score.parse_retries = cfg_.parse_retries;
          assessment::AssessmentPipeline pipeline(rubrics_, *provider_, *evaluator_, clock_, opt);
          auto report = pipeline.assess(s, *repo_.get(s.case_id, s.case_version));
          std::shared_lock state(state_mu_);
          auto stored = reports_.put(std::move(report));
          log_.append("report_generated", {{"report", assessment::to_json(*stored)}}, clock_.now());
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(queue_mu_);
        failed_[id] = e.what();
      }
      {
        std::lock_guard lock(queue_mu_);
        working_ = false;
      }
      idle_cv_.notify_all();
    }
  }

  DeploymentConfig cfg_;
  std::shared_ptr<llm::ChatProvider> provider_;
  const Clock& clock_;
  cases::RubricRegistry rubrics_;
  cases::CaseRepository repo_;
  session::SessionEngine engine_;
  assessment::ReportStore reports_;
  hub::LearningHub hub_;
  TokenRegistry tokens_;
  EventLog log_;
  std::unique_ptr<assessment::ChecklistEvaluator> evaluator_;
  ReplayInfo replay_info_;

  mutable std::shared_mutex state_mu_;  // exclusive only while snapshotting
  std::mutex publish_mu_, artifact_mu_;

  mutable std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  mutable std::condition_variable idle_cv_;
  std::deque<std::string> queue_;
  std::map<std::string, std::string> failed_;
  bool working_ = false, stopping_ = false;
  std::thread worker_;
};

}  // namespace medsim::service
