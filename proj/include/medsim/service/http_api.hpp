#pragma once

#include <httplib.h>

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "medsim/analytics/agreement.hpp"
#include "medsim/analytics/engagement.hpp"
#include "medsim/case/io.hpp"
#include "medsim/case/validate.hpp"
#include "medsim/service/platform.hpp"

namespace medsim::service {

// Maps error codes onto HTTP statuses. Anything unlisted is a 500.
inline int http_status(const std::string& code) {
  static const std::map<std::string, int> exact = {
      {"unauthorized", 401},       {"forbidden", 403},          {"not_owner", 403},
      {"no_data", 404},            {"no_report", 404},          {"session_not_active", 409},
      {"session_not_terminal", 409}, {"busy", 409},             {"time_expired", 409},
      {"reply_pending", 409},      {"no_pending_reply", 409},   {"reflection_locked", 409},
      {"report_exists", 409},      {"report_not_ready", 409},   {"appointment_in_past", 400},
      {"invalid_case", 422},       {"provider_unreachable", 502}, {"provider_error", 502},
      {"provider_timeout", 504},   {"schema_mismatch", 400},    {"empty_input", 400},
  };
  if (auto it = exact.find(code); it != exact.end()) return it->second;
  if (code.rfind("invalid_", 0) == 0) return 400;
  if (code.rfind("unknown_", 0) == 0) return 404;
  return 500;
}

inline json error_body(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

// Routes over a Platform. Every route but /health needs a bearer token;
// learners may only touch their own sessions and artifacts.
class HttpApi {
 public:
  explicit HttpApi(Platform& p) : p_(p) { install(); }

  httplib::Server& server() { return srv_; }

  // Binds and returns the actual port (useful with port 0).
  int bind(const std::string& host, int port) {
    if (port == 0) return srv_.bind_to_any_port(host);
    if (!srv_.bind_to_port(host, port)) return -1;
    return port;
  }
  bool listen() { return srv_.listen_after_bind(); }
  void stop() { srv_.stop(); }
  bool running() const { return srv_.is_running(); }
  void wait_until_ready() const { srv_.wait_until_ready(); }

 private:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&, const Principal&)>;
  enum Access { any_role, staff, admin_only };

  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, const std::string& code, const std::string& msg) {
    send(res, http_status(code), error_body(code, msg));
  }

  static json body_json(const httplib::Request& req, const char* code) {
    try {
      auto j = json::parse(req.body);
      if (!j.is_object()) throw Error(code, "request body must be a JSON object");
      return j;
    } catch (const json::parse_error& e) {
      throw Error(code, std::string("malformed JSON body: ") + e.what());
    }
  }

  template <class T>
  static T field(const json& j, const char* key, const char* code) {
    if (!j.contains(key)) throw Error(code, std::string("missing field '") + key + "'");
    try {
      return j.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(code, std::string("field '") + key + "' has the wrong type");
    }
  }

  static bool is_staff(const Principal& who) { return who.role != Role::learner; }

  static void require_self(const Principal& who, const std::string& learner) {
    if (!is_staff(who) && who.subject != learner) throw Error("forbidden", "learners may only access their own data");
  }

  session::Session owned_session(const Principal& who, const std::string& id) const {
    auto s = p_.sessions().get(id);
    require_self(who, s.learner_id);
    return s;
  }

  void route(const char* method, const std::string& pattern, Access access, Handler h) {
    auto wrapped = [this, access, h](const httplib::Request& req, httplib::Response& res) {
      try {
        auto header = req.get_header_value("Authorization");
        std::string token;
        if (header.rfind("Bearer ", 0) == 0) token = header.substr(7);
        auto who = p_.authenticate(token);
        if (!who) throw Error("unauthorized", "missing or unknown bearer token");
        if (access == staff && !is_staff(*who)) throw Error("forbidden", "instructor role required");
        if (access == admin_only && who->role != Role::admin) throw Error("forbidden", "admin role required");
        h(req, res, *who);
      } catch (const Error& e) {
        fail(res, e.code(), e.what());
      } catch (const std::exception& e) {
        fail(res, "internal", e.what());
      }
    };
    const std::string m = method;
    if (m == "GET") srv_.Get(pattern, wrapped);
    else srv_.Post(pattern, wrapped);
  }

  static json case_summary(const cases::CaseDefinition& c) {
    return {{"case_id", c.case_id},   {"version", c.version},
            {"title", c.title},       {"institution_id", c.institution_id},
            {"duration_limit_minutes", c.duration_limit_minutes}};
  }

  static cases::CaseDefinition case_from_body(const httplib::Request& req) {
    const auto type = req.get_header_value("Content-Type");
    try {
      if (type.find("json") != std::string::npos) return cases::case_from_json(json::parse(req.body));
      return cases::parse_case(req.body);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("invalid_case", e.what());
    }
  }

  static json series_json(const std::vector<hub::ProgressPoint>& pts) {
    json a = json::array();
    for (const auto& p : pts) a.push_back({{"session_index", p.session_index}, {"session_id", p.session_id}, {"value", p.value}});
    return a;
  }

  void install() {
    srv_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      send(res, 200, {{"status", "ok"}});
    });

    route("POST", "/auth/tokens", admin_only, [this](auto& req, auto& res, auto&) {
      auto b = body_json(req, "invalid_request");
      auto role = parse_role(field<std::string>(b, "role", "invalid_request"));
      auto subject = b.value("subject", std::string{});
      auto token = p_.mint_token(role, subject);
      send(res, 201, {{"token", token}, {"role", to_string(role)}, {"subject", subject}});
    });

    // ---- cases ----
    route("POST", "/cases", staff, [this](auto& req, auto& res, auto&) {
      auto pub = p_.publish_case(case_from_body(req));
      send(res, pub.created ? 201 : 200, cases::to_json(*pub.def));
    });
    route("POST", "/cases/validate", staff, [this](auto& req, auto& res, auto&) {
      auto def = case_from_body(req);
      auto out = cases::validate_case(def, {p_.config().max_duration_minutes}, &p_.rubrics());
      json v = json::array();
      for (const auto& x : out.violations) v.push_back({{"code", x.code}, {"message", x.message}});
      send(res, 200, {{"valid", out.violations.empty()}, {"violations", v}});
    });
    route("GET", "/cases", any_role, [this](auto&, auto& res, auto&) {
      json a = json::array();
      for (const auto& c : p_.cases().latest()) a.push_back(case_summary(*c));
      send(res, 200, a);
    });
    route("GET", "/cases/:id", any_role, [this](auto& req, auto& res, auto& who) {
      int version = req.has_param("version") ? std::stoi(req.get_param_value("version")) : 0;
      auto c = p_.cases().get(req.path_params.at("id"), version);
      // hidden facts stay with staff
      send(res, 200, is_staff(who) ? cases::to_json(*c) : case_summary(*c));
    });

    // ---- sessions ----
    route("POST", "/sessions", any_role, [this](auto& req, auto& res, auto& who) {
      auto b = body_json(req, "invalid_request");
      std::string learner = is_staff(who) ? field<std::string>(b, "learner_id", "invalid_request") : who.subject;
      if (b.contains("learner_id") && b["learner_id"] != learner) throw Error("forbidden", "learners start their own sessions");
      cases::CaseRef ref{field<std::string>(b, "case_id", "invalid_request"), b.value("version", 0)};
      auto modality = parse_modality(b.value("modality", std::string("text")));
      auto s = p_.start_session(learner, ref, modality);
      send(res, 201, session::to_json(s, false));
    });
    route("GET", "/sessions/:id", any_role, [this](auto& req, auto& res, auto& who) {
      auto s = owned_session(who, req.path_params.at("id"));
      auto j = session::to_json(s, true);
      j.erase("patient_prompt");
      send(res, 200, j);
    });
    route("POST", "/sessions/:id/turns", any_role, [this](auto& req, auto& res, auto& who) {
      auto s = owned_session(who, req.path_params.at("id"));
      auto b = body_json(req, "invalid_turn");
      auto text = field<std::string>(b, "text", "invalid_turn");
      auto reply = p_.submit_turn(s.session_id, text);
      send(res, 200, session::to_json(reply));
    });
    route("POST", "/sessions/:id/retry", any_role, [this](auto& req, auto& res, auto& who) {
      auto s = owned_session(who, req.path_params.at("id"));
      send(res, 200, session::to_json(p_.retry_reply(s.session_id)));
    });
    route("POST", "/sessions/:id/complete", any_role, [this](auto& req, auto& res, auto& who) {
      auto s = owned_session(who, req.path_params.at("id"));
      send(res, 200, session::to_json(p_.complete_session(s.session_id), false));
    });
    route("POST", "/sessions/:id/abort", any_role, [this](auto& req, auto& res, auto& who) {
      auto s = owned_session(who, req.path_params.at("id"));
      send(res, 200, session::to_json(p_.abort_session(s.session_id), false));
    });
    route("GET", "/sessions/:id/transcript", any_role, [this](auto& req, auto& res, auto& who) {
      auto s = owned_session(who, req.path_params.at("id"));
      json turns = json::array();
      for (const auto& t : s.turns) turns.push_back(session::to_json(t));
      send(res, 200, {{"session_id", s.session_id}, {"state", session::to_string(s.state)},
                      {"transcript_hash", session::transcript_hash(s)}, {"turns", turns}});
    });
    route("GET", "/sessions/:id/report", any_role, [this](auto& req, auto& res, auto& who) {
      auto s = owned_session(who, req.path_params.at("id"));
      auto r = p_.report(s.session_id);
      switch (r.state) {
        case Platform::ReportState::ready: send(res, 200, assessment::to_json(*r.report)); break;
        case Platform::ReportState::pending: send(res, 202, {{"status", "pending"}}); break;
        case Platform::ReportState::failed: fail(res, "assessment_failed", r.error); break;
        case Platform::ReportState::none: fail(res, "no_report", r.error); break;
      }
    });
    route("POST", "/sessions/:id/reflection", any_role, [this](auto& req, auto& res, auto& who) {
      auto s = owned_session(who, req.path_params.at("id"));
      auto b = body_json(req, "invalid_reflection");
      auto r = p_.record_reflection(s.learner_id, s.session_id, field<std::string>(b, "text", "invalid_reflection"));
      send(res, 200, hub::to_json(r));
    });

    // ---- learning hub ----
    route("POST", "/learners/:id/goals", any_role, [this](auto& req, auto& res, auto& who) {
      const auto learner = req.path_params.at("id");
      require_self(who, learner);
      auto b = body_json(req, "invalid_goal");
      if (b.contains("goal_id")) {
        auto g = p_.set_goal_status(learner, field<std::string>(b, "goal_id", "invalid_goal"),
                                    hub::parse_goal_status(field<std::string>(b, "status", "invalid_goal")));
        send(res, 200, hub::to_json(g));
        return;
      }
      std::optional<std::string> element;
      if (b.contains("target_element") && !b["target_element"].is_null())
        element = field<std::string>(b, "target_element", "invalid_goal");
      send(res, 201, hub::to_json(p_.set_goal(learner, field<std::string>(b, "text", "invalid_goal"), element)));
    });
    route("GET", "/learners/:id/goals", any_role, [this](auto& req, auto& res, auto& who) {
      const auto learner = req.path_params.at("id");
      require_self(who, learner);
      json a = json::array();
      for (const auto& g : p_.hub().goals(learner)) a.push_back(hub::to_json(g));
      send(res, 200, a);
    });
    route("POST", "/learners/:id/appointments", any_role, [this](auto& req, auto& res, auto& who) {
      const auto learner = req.path_params.at("id");
      require_self(who, learner);
      auto b = body_json(req, "invalid_appointment");
      if (b.contains("appointment_id")) {
        auto a = p_.set_appointment_status(
            learner, field<std::string>(b, "appointment_id", "invalid_appointment"),
            hub::parse_appointment_status(field<std::string>(b, "status", "invalid_appointment")));
        send(res, 200, hub::to_json(a));
        return;
      }
      cases::CaseRef ref{field<std::string>(b, "case_id", "invalid_appointment"), b.value("version", 0)};
      TimePoint when;
      try {
        when = parse_rfc3339(field<std::string>(b, "scheduled_for", "invalid_appointment"));
      } catch (const Error& e) {
        throw Error("invalid_appointment", e.what());
      }
      send(res, 201, hub::to_json(p_.schedule(learner, ref, when)));
    });
    route("GET", "/learners/:id/appointments", any_role, [this](auto& req, auto& res, auto& who) {
      const auto learner = req.path_params.at("id");
      require_self(who, learner);
      json a = json::array();
      for (const auto& x : p_.hub().appointments(learner)) a.push_back(hub::to_json(x));
      send(res, 200, a);
    });
    route("GET", "/learners/:id/progress", any_role, [this](auto& req, auto& res, auto& who) {
      const auto learner = req.path_params.at("id");
      require_self(who, learner);
      const bool global = req.get_param_value("global_mean") == "true";
      auto s = p_.hub().progress_series(learner, global);
      json el = json::object();
      for (const auto& [k, pts] : s.elements) el[k] = series_json(pts);
      json out = {{"learner_id", s.learner_id}, {"elements", el}};
      if (s.global_mean) out["global_mean"] = series_json(*s.global_mean);
      send(res, 200, out);
    });
    route("GET", "/learners/:id/charts", any_role, [this](auto& req, auto& res, auto& who) {
      const auto learner = req.path_params.at("id");
      require_self(who, learner);
      json a = json::array();
      for (const auto& c : p_.hub().chart_review(learner)) {
        auto sj = session::to_json(c.session, false);
        a.push_back({{"session", sj},
                     {"aborted", c.aborted},
                     {"transcript_hash", c.transcript_hash},
                     {"report", c.report ? assessment::to_json(*c.report) : json(nullptr)},
                     {"reflection", c.reflection ? hub::to_json(*c.reflection) : json(nullptr)}});
      }
      send(res, 200, a);
    });

    // ---- analytics ----
    route("GET", "/analytics/engagement", staff, [this](auto& req, auto& res, auto&) {
      auto table = analytics::engagement_summary(p_.telemetry());
      std::ostringstream out;
      if (req.get_param_value("format") == "csv") {
        analytics::write_engagement_csv(out, table);
        res.status = 200;
        res.set_content(out.str(), "text/csv");
        return;
      }
      json groups = json::object();
      const auto names = analytics::engagement_metric_names();
      auto metrics = [&](const analytics::EngagementMetrics& m) {
        json o = json::object();
        const auto v = analytics::engagement_metric_values(m);
        for (std::size_t i = 0; i < names.size(); ++i) o[names[i]] = std::isnan(v[i]) ? json(nullptr) : json(v[i]);
        return o;
      };
      for (const auto& g : table.groups) groups[g.group] = metrics(g);
      send(res, 200, {{"groups", groups}, {"overall", metrics(table.overall)}});
    });
    route("GET", "/analytics/telemetry", staff, [this](auto&, auto& res, auto&) {
      std::ostringstream out;
      analytics::write_telemetry(out, p_.telemetry());
      res.status = 200;
      res.set_content(out.str(), "text/csv");
    });
    route("POST", "/analytics/agreement", staff, [](auto& req, auto& res, auto&) {
      auto b = body_json(req, "invalid_request");
      std::vector<analytics::ScorePair> pairs;
      for (const auto& p : field<json>(b, "pairs", "invalid_request")) {
        if (!p.is_object()) throw Error("invalid_request", "each pair needs human and ai scores");
        pairs.push_back({field<int>(p, "human", "invalid_request"), field<int>(p, "ai", "invalid_request")});
      }
      auto r = analytics::scoring_agreement(pairs);
      send(res, 200, {{"n_pairs", r.n_pairs}, {"exact", r.exact}, {"off_by_one", r.off_by_one},
                      {"thresholded", r.thresholded}});
    });
  }

  Platform& p_;
  httplib::Server srv_;
};

}  // namespace medsim::service
