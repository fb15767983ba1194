#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "medsim/case/prompt.hpp"
#include "medsim/case/repository.hpp"
#include "medsim/core/clock.hpp"
#include "medsim/core/text.hpp"
#include "medsim/llm/provider.hpp"
#include "medsim/session/session.hpp"

namespace medsim::session {

// Called with the session lock held, in the order changes happen.
class SessionObserver {
 public:
  virtual ~SessionObserver() = default;
  virtual void session_started(const Session&) {}
  virtual void turn_added(const Session&, const Turn&) {}
  virtual void session_ended(const Session&) {}
};

// Encounter lifecycle. Turns within one session are serialized: a second
// submit while a reply is in flight is rejected with `busy`. The clock starts
// at start_session; one in-flight turn may finish after the deadline, then the
// session completes with its end time clamped to the deadline.
class SessionEngine {
 public:
  SessionEngine(const cases::CaseRepository& cases, llm::ChatProvider& provider, const Clock& clock,
                SessionObserver* observer = nullptr)
      : cases_(cases), provider_(provider), clock_(clock), observer_(observer) {}

  void set_observer(SessionObserver* o) { observer_ = o; }

  Session start_session(const std::string& learner_id, const cases::CaseRef& ref, Modality modality,
                        const std::string& institution_id = {}) {
    if (text::trim(learner_id).empty()) throw Error("unknown_learner", "learner_id is required");
    auto def = cases_.get(ref.case_id, ref.version);
    auto prompt = cases::render_patient_prompt(*def, cases_.limits());

    auto e = std::make_shared<Entry>();
    auto& s = e->s;
    s.learner_id = learner_id;
    s.institution_id = institution_id.empty() ? def->institution_id : institution_id;
    s.case_id = def->case_id;
    s.case_version = def->version;
    s.modality = modality;
    s.started_at = clock_.now();
    s.duration_limit_minutes = def->duration_limit_minutes;
    s.patient_prompt = std::move(prompt);
    e->params = {def->generation.temperature, def->generation.max_reply_length};

    std::lock_guard map_lock(mu_);
    s.session_id = format_id(++next_id_);
    std::lock_guard lock(e->mu);
    sessions_[s.session_id] = e;
    if (observer_) observer_->session_started(s);
    return s;
  }

  // Returns the patient's reply. On provider failure the student turn stays
  // in the transcript and retry_reply() asks again.
  Turn submit_turn(const std::string& session_id, const std::string& utterance) {
    if (text::trim(utterance).empty()) throw Error("invalid_turn", "utterance is empty");
    auto e = entry(session_id);
    llm::ChatExchange ex;
    {
      std::lock_guard lock(e->mu);
      check_ready(*e);
      if (e->s.awaiting_reply())
        throw Error("reply_pending", "the previous turn has no reply yet; retry it first");
      auto now = clock_.now();
      Turn t{Role::student, utterance, std::max(now, last_timestamp(e->s)), next_sequence(e->s)};
      e->s.turns.push_back(t);
      if (observer_) observer_->turn_added(e->s, t);
      e->in_flight = true;
      ex = exchange(*e);
    }
    return obtain_reply(*e, ex);
  }

  Turn retry_reply(const std::string& session_id) {
    auto e = entry(session_id);
    llm::ChatExchange ex;
    {
      std::lock_guard lock(e->mu);
      check_ready(*e);
      if (!e->s.awaiting_reply()) throw Error("no_pending_turn", "nothing to retry");
      e->in_flight = true;
      ex = exchange(*e);
    }
    return obtain_reply(*e, ex);
  }

  Session complete_session(const std::string& session_id) { return finish(session_id, SessionState::completed); }
  Session abort_session(const std::string& session_id) { return finish(session_id, SessionState::aborted); }

  // Completes every active session past its deadline; returns their ids.
  std::vector<std::string> expire_due() {
    std::vector<std::string> expired;
    for (auto& e : entries()) {
      std::lock_guard lock(e->mu);
      if (e->s.terminal() || e->in_flight) continue;
      if (clock_.now() >= e->s.deadline()) {
        end_locked(*e, SessionState::completed, e->s.deadline(), "time_expired");
        expired.push_back(e->s.session_id);
      }
    }
    return expired;
  }

  Session get(const std::string& session_id) const {
    auto e = entry(session_id);
    std::lock_guard lock(e->mu);
    return e->s;
  }

  bool contains(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    return sessions_.count(session_id) > 0;
  }

  std::vector<Session> sessions() const {
    std::vector<Session> out;
    for (auto& e : entries()) {
      std::lock_guard lock(e->mu);
      out.push_back(e->s);
    }
    return out;
  }

  std::vector<Session> sessions_for_learner(const std::string& learner_id) const {
    std::vector<Session> out;
    for (auto& s : sessions())
      if (s.learner_id == learner_id) out.push_back(std::move(s));
    return out;
  }

  // ---- replay: apply recorded changes without the provider or the clock ----

  void restore_started(Session s) {
    auto def = cases_.get(s.case_id, s.case_version);
    auto e = std::make_shared<Entry>();
    e->params = {def->generation.temperature, def->generation.max_reply_length};
    std::lock_guard lock(mu_);
    if (sessions_.count(s.session_id)) throw Error("invalid_event", "session " + s.session_id + " started twice");
    next_id_ = std::max(next_id_, parse_id(s.session_id));
    e->s = std::move(s);
    sessions_[e->s.session_id] = e;
  }

  void restore_turn(const std::string& session_id, const Turn& t) {
    auto e = entry(session_id);
    std::lock_guard lock(e->mu);
    if (t.sequence_no != next_sequence(e->s))
      throw Error("invalid_event", "turn " + std::to_string(t.sequence_no) + " out of order in " + session_id);
    e->s.turns.push_back(t);
  }

  void restore_end(const std::string& session_id, SessionState state, TimePoint ended_at, const std::string& reason) {
    auto e = entry(session_id);
    std::lock_guard lock(e->mu);
    e->s.state = state;
    e->s.ended_at = ended_at;
    e->s.end_reason = reason;
  }

 private:
  struct Entry {
    mutable std::mutex mu;
    Session s;
    llm::GenerationParams params;
    bool in_flight = false;
  };

  static std::string format_id(long n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ses-%06ld", n);
    return buf;
  }
  static long parse_id(const std::string& id) {
    auto dash = id.rfind('-');
    try {
      return dash == std::string::npos ? 0 : std::stol(id.substr(dash + 1));
    } catch (const std::exception&) {
      return 0;
    }
  }
  static int next_sequence(const Session& s) { return s.turns.empty() ? 1 : s.turns.back().sequence_no + 1; }
  static TimePoint last_timestamp(const Session& s) { return s.turns.empty() ? s.started_at : s.turns.back().timestamp; }

  std::shared_ptr<Entry> entry(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error("unknown_session", "no session " + id);
    return it->second;
  }

  std::vector<std::shared_ptr<Entry>> entries() const {
    std::lock_guard lock(mu_);
    std::vector<std::shared_ptr<Entry>> out;
    for (const auto& [id, e] : sessions_) out.push_back(e);
    return out;
  }

  // Lock held. Throws busy, session_not_active or time_expired (after
  // completing the session).
  void check_ready(Entry& e) {
    if (e.in_flight) throw Error("busy", "a turn is already in flight for " + e.s.session_id);
    if (e.s.terminal()) throw Error("session_not_active", e.s.session_id + " is " + to_string(e.s.state));
    if (clock_.now() >= e.s.deadline()) {
      end_locked(e, SessionState::completed, e.s.deadline(), "time_expired");
      throw Error("time_expired", "the " + std::to_string(e.s.duration_limit_minutes) + "-minute limit has passed");
    }
  }

  llm::ChatExchange exchange(const Entry& e) const {
    llm::ChatExchange ex;
    ex.system_prompt = e.s.patient_prompt;
    ex.params = e.params;
    for (const auto& t : e.s.turns) ex.history.push_back({t.role, t.content, t.timestamp});
    return ex;
  }

  Turn obtain_reply(Entry& e, const llm::ChatExchange& ex) {
    llm::ProviderResult r;
    try {
      r = provider_.complete(ex);
      if (text::trim(r.content).empty()) throw llm::ProviderError("malformed_response", "empty patient reply");
    } catch (...) {
      std::lock_guard lock(e.mu);
      e.in_flight = false;
      throw;
    }
    std::lock_guard lock(e.mu);
    e.in_flight = false;
    auto now = clock_.now();
    auto ts = std::clamp(now, last_timestamp(e.s), std::max(last_timestamp(e.s), e.s.deadline()));
    Turn reply{Role::patient, r.content, ts, next_sequence(e.s)};
    e.s.turns.push_back(reply);
    if (observer_) observer_->turn_added(e.s, reply);
    if (now >= e.s.deadline()) end_locked(e, SessionState::completed, e.s.deadline(), "time_expired");
    return reply;
  }

  Session finish(const std::string& id, SessionState target) {
    auto e = entry(id);
    std::lock_guard lock(e->mu);
    if (e->in_flight) throw Error("busy", "a turn is in flight for " + id);
    if (e->s.terminal()) throw Error("session_not_active", id + " is " + to_string(e->s.state));
    auto now = clock_.now();
    bool late = now >= e->s.deadline();
    std::string reason = target == SessionState::aborted ? "aborted" : late ? "time_expired" : "completed";
    end_locked(*e, target, std::min(now, e->s.deadline()), reason);
    return e->s;
  }

  void end_locked(Entry& e, SessionState state, TimePoint at, const std::string& reason) {
    e.s.state = state;
    e.s.ended_at = std::max(at, last_timestamp(e.s));
    e.s.end_reason = reason;
    if (observer_) observer_->session_ended(e.s);
  }

  const cases::CaseRepository& cases_;
  llm::ChatProvider& provider_;
  const Clock& clock_;
  SessionObserver* observer_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  long next_id_ = 0;
};

}  // namespace medsim::session
