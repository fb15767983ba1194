// medsim command line: the service, case tooling, headless encounters,
// analysis and exports.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "medsim/analytics/agreement.hpp"
#include "medsim/analytics/engagement.hpp"
#include "medsim/analytics/lagged.hpp"
#include "medsim/analytics/model_frame.hpp"
#include "medsim/analytics/rank_tests.hpp"
#include "medsim/analytics/two_group.hpp"
#include "medsim/case/io.hpp"
#include "medsim/case/prompt.hpp"
#include "medsim/case/validate.hpp"
#include "medsim/service/export.hpp"
#include "medsim/service/http_api.hpp"
#include "medsim/service/simulate.hpp"

using namespace medsim;
namespace an = medsim::analytics;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string num(double v) { return std::isnan(v) ? "NA" : fmt("%.6g", v); }

// ---- serve ----

int run_serve(const std::string& config_path, std::optional<int> port_override) {
  auto cfg = service::load_config(config_path);
  if (port_override) cfg.port = *port_override;

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);  // handled by sigwait below

  SystemClock clock;
  service::Platform platform(cfg, service::Platform::make_provider(cfg), clock);
  platform.open();
  const auto& info = platform.replay_info();
  std::cerr << service::describe(cfg) << "\n"
            << "replayed " << info.events << " events" << (info.from_snapshot ? " after snapshot" : "")
            << (info.dropped_torn_tail ? " (dropped a torn final record)" : "") << "\n";

  service::HttpApi api(platform);
  const int port = api.bind(cfg.host, cfg.port);
  if (port < 0) throw Error("io_error", "cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
  std::cout << "listening on " << cfg.host << ":" << port << std::endl;

  std::atomic<bool> done{false};
  std::thread ticker([&] {
    while (!done) {
      std::this_thread::sleep_for(std::chrono::milliseconds(500));
      try {
        platform.tick();
      } catch (const std::exception& e) {
        std::cerr << "tick: " << e.what() << "\n";
      }
    }
  });
  std::thread signals([&] {
    int sig = 0;
    sigwait(&set, &sig);
    api.stop();
  });
  signals.detach();
  api.listen();
  done = true;
  ticker.join();
  platform.close();
  platform.snapshot();
  return 0;
}

// ---- case ----

int run_case_validate(const std::string& file, int max_duration, const std::vector<std::string>& rubric_paths) {
  auto def = cases::load_case_file(file);
  cases::RubricRegistry rubrics;
  for (const auto& r : rubric_paths) rubrics.add(cases::load_rubric(r));
  auto out = cases::validate_case(def, {max_duration}, rubric_paths.empty() ? nullptr : &rubrics);
  if (out.ok()) {
    std::cout << file << ": ok (" << def.case_id << ", " << def.checklist.size() << " checklist items)\n";
    return 0;
  }
  for (const auto& v : out.violations) std::cout << file << ": " << v.code << ": " << v.message << "\n";
  return 1;
}

int run_case_render(const std::string& file, int max_duration) {
  auto def = cases::load_case_file(file);
  std::cout << cases::render_patient_prompt(def, {max_duration});
  return 0;
}

// ---- simulate ----

int run_simulate(const std::string& script_path, const std::vector<std::string>& rubric_args,
                 const std::string& patient_script, bool as_json) {
  auto script = session::load_encounter_script(script_path);
  std::vector<service::RubricFiles> rubrics;
  for (const auto& r : rubric_args) {
    auto eq = r.find('=');
    if (eq == std::string::npos) rubrics.push_back({r, std::nullopt});
    else rubrics.push_back({r.substr(0, eq), r.substr(eq + 1)});
  }
  llm::PatientScript patient;
  if (!patient_script.empty()) patient = llm::load_patient_script(patient_script);
  auto res = service::simulate_encounter(script, rubrics, patient);
  if (as_json) {
    std::cout << nlohmann::json{{"session", session::to_json(res.session, false)}, {"report", assessment::to_json(res.report)}}.dump(2)
              << "\n";
    return 0;
  }
  const auto& r = res.report;
  std::cout << "session " << res.session.session_id << " (" << res.session.case_id << " v" << res.session.case_version
            << "): " << res.session.student_turns() << " student turns, " << fmt("%.1f", res.session.duration_minutes())
            << " min, ended " << res.session.end_reason << "\n";
  std::cout << "checklist completion: " << fmt("%.1f", r.checklist_completion_pct) << "%\n";
  for (const auto& c : r.checklist_results)
    std::cout << "  " << c.item_id << "  " << assessment::to_string(c.elicited_status) << "\n";
  if (r.mirs_overall) std::cout << "MIRS overall: " << fmt("%.3f", *r.mirs_overall) << "\n";
  for (const auto& [el, v] : r.element_aggregates) std::cout << "  " << el << "  " << fmt("%.3f", v) << "\n";
  if (!r.failed_items.empty()) {
    std::cout << "not scored:";
    for (const auto& f : r.failed_items) std::cout << " " << f;
    std::cout << "\n";
  }
  return 0;
}

// ---- analyze ----

double numeric_column(const an::TelemetryRow& r, const std::string& name) {
  if (name == "duration_minutes") return r.duration_minutes;
  if (name == "turn_count") return r.turn_count;
  if (name == "checklist_completion_pct") return r.checklist_completion_pct;
  if (name == "mirs_overall") return r.mirs_overall;
  if (name == "reflection_char_length") return static_cast<double>(r.reflection_char_length);
  throw Error("unknown_column", "'" + name + "' is not a numeric telemetry column");
}

std::string group_column(const an::TelemetryRow& r, const std::string& name) {
  if (name == "institution_id") return r.institution_id;
  if (name == "case_id") return r.case_id;
  if (name == "modality") return to_string(r.modality);
  if (name == "learner_id") return r.learner_id;
  throw Error("unknown_column", "'" + name + "' is not a grouping telemetry column");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');)
    if (!text::trim(part).empty()) out.push_back(std::string(text::trim(part)));
  return out;
}

an::SummaryStats parse_summary(const std::string& s) {
  auto parts = split_list(s);
  if (parts.size() != 3) throw Error("invalid_argument", "summary stats are mean,sd,n: '" + s + "'");
  try {
    return {std::stod(parts[0]), std::stod(parts[1]), static_cast<std::size_t>(std::stoul(parts[2]))};
  } catch (const std::exception&) {
    throw Error("invalid_argument", "summary stats are mean,sd,n: '" + s + "'");
  }
}

int run_engagement(const std::string& telemetry, const std::string& format) {
  auto set = an::ingest_telemetry(telemetry);
  auto table = an::engagement_summary(set.rows);
  if (format == "csv") {
    an::write_engagement_csv(std::cout, table);
  } else {
    std::cout << set.rows.size() << " rows, " << set.n_excluded << " excluded, " << set.n_learners << " learners\n";
    an::write_engagement_summary(std::cout, table);
  }
  return 0;
}

int run_compare(const std::vector<std::string>& stats, const std::string& format) {
  auto a = parse_summary(stats.at(0)), b = parse_summary(stats.at(1));
  auto t = an::welch_t(a, b);
  auto d = an::cohens_d(a, b);
  if (format == "csv") {
    csv::write_row(std::cout, {"difference", "statistic", "df", "p_value", "cohens_d", "d_pooling"});
    csv::write_row(std::cout, {fmt("%.6f", b.mean - a.mean), fmt("%.6f", t.statistic), fmt("%.6f", *t.df), fmt("%.6g", t.p_value), fmt("%.6f", d.d),
                               d.pooling});
    return 0;
  }
  std::cout << "difference (second - first) = " << fmt("%.3f", b.mean - a.mean) << "\n";
  std::cout << "Welch t = " << fmt("%.3f", t.statistic) << ", df = " << fmt("%.2f", *t.df)
            << ", p = " << fmt("%.3g", t.p_value) << "\n"
            << "Cohen's d = " << fmt("%.3f", d.d) << " (" << d.pooling << ")\n";
  if (!t.note.empty()) std::cout << "note: " << t.note << "\n";
  return 0;
}

int run_kw(const std::string& telemetry, const std::string& outcome, const std::string& group,
           const std::string& adjust, const std::string& format) {
  auto set = an::ingest_telemetry(telemetry);
  std::map<std::string, std::vector<double>> by;
  for (const auto& r : an::included(set.rows)) {
    const double v = numeric_column(r, outcome);
    if (std::isfinite(v)) by[group_column(r, group)].push_back(v);
  }
  std::vector<std::string> names;
  std::vector<std::vector<double>> groups;
  for (auto& [k, v] : by) {
    names.push_back(k);
    groups.push_back(std::move(v));
  }
  auto kw = an::kruskal_wallis(groups);
  auto dunn = an::dunn_posthoc(groups, an::parse_p_adjust(adjust));
  if (format == "csv") {
    csv::write_row(std::cout, {"comparison", "statistic", "df", "p_value", "p_adjusted"});
    csv::write_row(std::cout, {"kruskal_wallis", fmt("%.6f", kw.statistic), fmt("%.0f", *kw.df), fmt("%.6g", kw.p_value), ""});
    for (const auto& d : dunn)
      csv::write_row(std::cout, {names[d.group_a] + " vs " + names[d.group_b], fmt("%.6f", d.test.statistic), "",
                                 fmt("%.6g", d.test.p_value), fmt("%.6g", d.p_adjusted)});
    return 0;
  }
  std::cout << "Kruskal-Wallis on " << outcome << " by " << group << ": H = " << fmt("%.3f", kw.statistic)
            << ", df = " << fmt("%.0f", *kw.df) << ", p = " << fmt("%.3g", kw.p_value) << "\n";
  std::cout << "Dunn post hoc (" << adjust << "):\n";
  for (const auto& d : dunn)
    std::cout << "  " << names[d.group_a] << " vs " << names[d.group_b] << ": z = " << fmt("%.3f", d.test.statistic)
              << ", p = " << fmt("%.3g", d.test.p_value) << ", adjusted " << fmt("%.3g", d.p_adjusted) << "\n";
  return 0;
}

void print_lmm(const an::LmmFit& fit, const std::string& outcome, const std::string& format) {
  if (format == "csv") {
    csv::write_row(std::cout, {"term", "estimate", "std_error", "z", "p_value", "ci_low", "ci_high"});
    for (const auto& fe : fit.fixed_effects)
      csv::write_row(std::cout, {fe.name, num(fe.estimate), num(fe.std_error), num(fe.z), num(fe.p_value),
                                 num(fe.ci_low), num(fe.ci_high)});
    csv::write_row(std::cout, {"var_learner", num(fit.variance_components.learner), "", "", "", "", ""});
    csv::write_row(std::cout, {"var_case", num(fit.variance_components.case_id), "", "", "", "", ""});
    csv::write_row(std::cout, {"var_residual", num(fit.variance_components.residual), "", "", "", "", ""});
    return;
  }
  std::cout << "Linear mixed model for " << outcome << " (" << (fit.reml ? "REML" : "ML") << "), n = " << fit.n_obs
            << ", learners = " << fit.n_learners << ", cases = " << fit.n_cases << "\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-34s %11s %10s %8s %10s  %s\n", "term", "estimate", "se", "z", "p", "95% CI");
  std::cout << buf;
  for (const auto& fe : fit.fixed_effects) {
    std::snprintf(buf, sizeof buf, "%-34s %11.4f %10.4f %8.3f %10.3g  [%.4f, %.4f]\n", fe.name.c_str(), fe.estimate,
                  fe.std_error, fe.z, fe.p_value, fe.ci_low, fe.ci_high);
    std::cout << buf;
  }
  std::cout << "variance: learner " << fmt("%.4f", fit.variance_components.learner) << ", case "
            << fmt("%.4f", fit.variance_components.case_id) << ", residual "
            << fmt("%.4f", fit.variance_components.residual) << "\n"
            << "log-likelihood " << fmt("%.4f", fit.log_likelihood) << (fit.converged ? "" : " (NOT converged)") << "\n";
  if (!fit.diagnostics.empty()) std::cout << fit.diagnostics << "\n";
}

int run_lmm(const an::ModelFrame& frame, const std::string& outcome, const std::string& fixed,
            const std::string& random, bool ml, const std::string& format) {
  an::LmmOptions opts;
  opts.random = an::parse_random_effects(random);
  opts.reml = !ml;
  auto fit = an::fit_lmm(frame.design(outcome, split_list(fixed)), opts);
  print_lmm(fit, outcome, format);
  return fit.converged ? 0 : 3;
}

// ---- validate-scoring ----

int run_validate_scoring(const std::string& human, const std::string& ai, const std::string& format) {
  auto load = [](const std::string& path) {
    auto t = csv::read_file(path);
    for (const char* c : {"transcript_id", "item_id", "score"})
      if (!t.has_column(c)) throw Error("schema_mismatch", path + ": missing column '" + c + "'");
    std::map<std::pair<std::string, std::string>, int> m;
    const auto ti = t.column("transcript_id"), ii = t.column("item_id"), si = t.column("score");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      const auto where = path + " line " + std::to_string(t.line_numbers[r]);
      int score = 0;
      try {
        score = std::stoi(row.at(si));
      } catch (const std::exception&) {
        throw Error("schema_mismatch", where + ": score is not an integer");
      }
      if (!m.emplace(std::make_pair(row.at(ti), row.at(ii)), score).second)
        throw Error("schema_mismatch", where + ": duplicate transcript/item pair");
    }
    return m;
  };
  auto h = load(human), a = load(ai);
  std::vector<an::ScorePair> pairs;
  std::size_t unmatched = 0;
  for (const auto& [key, score] : h) {
    auto it = a.find(key);
    if (it == a.end()) ++unmatched;
    else pairs.push_back({score, it->second});
  }
  unmatched += a.size() - pairs.size();
  auto r = an::scoring_agreement(pairs);
  if (format == "csv") {
    csv::write_row(std::cout, {"n_pairs", "exact", "off_by_one", "thresholded", "unmatched"});
    csv::write_row(std::cout, {std::to_string(r.n_pairs), fmt("%.6f", r.exact), fmt("%.6f", r.off_by_one),
                               fmt("%.6f", r.thresholded), std::to_string(unmatched)});
    return 0;
  }
  std::cout << r.n_pairs << " matched pairs";
  if (unmatched) std::cout << " (" << unmatched << " unmatched rows ignored)";
  std::cout << "\nexact agreement:        " << fmt("%.1f", 100 * r.exact) << "%\n"
            << "within one point:       " << fmt("%.1f", 100 * r.off_by_one) << "%\n"
            << "threshold agreement:    " << fmt("%.1f", 100 * r.thresholded) << "% (proficient = 3 or higher)\n";
  return 0;
}

// ---- export ----

int run_export(const std::string& what, const std::string& data_dir, bool pseudonymize, std::string salt,
               const std::string& out_path) {
  if (pseudonymize && salt.empty()) {
    if (const char* env = std::getenv("MEDSIM_EXPORT_SALT")) salt = env;
    if (salt.empty()) throw Error("invalid_argument", "--pseudonymize needs --salt or MEDSIM_EXPORT_SALT");
  }
  service::DeploymentConfig cfg;
  cfg.data_dir = data_dir;
  ManualClock clock;
  service::Platform p(cfg, std::make_shared<llm::MockProvider>(), clock);
  p.open_read_only();
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw Error("io_error", "cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  service::ExportOptions o{pseudonymize, salt};
  if (what == "reports") service::export_reports(out, p, o);
  else if (what == "reflections") service::export_reflections(out, p, o);
  else service::export_telemetry(out, p, o);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medsim: simulated patient encounters, assessment and analytics"};
  app.require_subcommand(1);
  int rc = 0;

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string config_path;
  std::optional<int> port;
  serve->add_option("--config", config_path, "Deployment config (YAML)")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Override listen port; 0 picks a free one");
  serve->callback([&] { rc = run_serve(config_path, port); });

  // case
  auto* kase = app.add_subcommand("case", "Case file tools");
  kase->require_subcommand(1);
  std::string case_file;
  int max_duration = cases::kDefaultMaxDurationMinutes;
  std::vector<std::string> case_rubrics;
  auto* validate = kase->add_subcommand("validate", "Check a case file against the schema");
  validate->add_option("file", case_file)->required()->check(CLI::ExistingFile);
  validate->add_option("--max-duration", max_duration, "Deployment ceiling in minutes");
  validate->add_option("--rubric", case_rubrics, "Rubric files the case may reference");
  validate->callback([&] { rc = run_case_validate(case_file, max_duration, case_rubrics); });
  auto* render = kase->add_subcommand("render-prompt", "Print the patient system prompt");
  render->add_option("file", case_file)->required()->check(CLI::ExistingFile);
  render->add_option("--max-duration", max_duration, "Deployment ceiling in minutes");
  render->callback([&] { rc = run_case_render(case_file, max_duration); });

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a scripted student through one encounter");
  std::string script_path, patient_script;
  std::vector<std::string> sim_rubrics;
  bool sim_json = false;
  sim->add_option("--script", script_path, "Encounter script (YAML)")->required()->check(CLI::ExistingFile);
  sim->add_option("--rubric", sim_rubrics, "Rubric file, optionally rubric.yaml=element_map.yaml")->required();
  sim->add_option("--patient-script", patient_script, "Mock patient small-talk rules");
  sim->add_flag("--json", sim_json, "Print session and report as JSON");
  sim->callback([&] { rc = run_simulate(script_path, sim_rubrics, patient_script, sim_json); });

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Statistics over telemetry exports");
  analyze->require_subcommand(1);
  std::string telemetry, format = "table", outcome, group = "institution_id", adjust = "none", fixed,
                         random = "both";
  bool ml = false;
  auto fmt_opt = [&](CLI::App* c) {
    c->add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));
  };

  auto* eng = analyze->add_subcommand("engagement", "Per-institution engagement table");
  eng->add_option("--telemetry", telemetry)->required()->check(CLI::ExistingFile);
  fmt_opt(eng);
  eng->callback([&] { rc = run_engagement(telemetry, format); });

  auto* cmp = analyze->add_subcommand("compare", "Welch t and Cohen's d from summary statistics");
  std::vector<std::string> stats;
  cmp->add_option("--summary-stats", stats, "Two groups as mean,sd,n")->required()->expected(2);
  fmt_opt(cmp);
  cmp->callback([&] { rc = run_compare(stats, format); });

  auto* kw = analyze->add_subcommand("kw", "Kruskal-Wallis with Dunn post hoc");
  kw->add_option("--telemetry", telemetry)->required()->check(CLI::ExistingFile);
  kw->add_option("--outcome", outcome)->required();
  kw->add_option("--group", group, "Grouping column");
  kw->add_option("--adjust", adjust, "none, bonferroni or holm")->check(CLI::IsMember({"none", "bonferroni", "holm"}));
  fmt_opt(kw);
  kw->callback([&] { rc = run_kw(telemetry, outcome, group, adjust, format); });

  auto* lmm = analyze->add_subcommand("lmm", "Linear mixed model with learner and case random intercepts");
  lmm->add_option("--telemetry", telemetry)->required()->check(CLI::ExistingFile);
  lmm->add_option("--outcome", outcome)->required();
  lmm->add_option("--fixed", fixed, "Comma-separated predictors")->required();
  lmm->add_option("--random", random, "both, learner or case");
  lmm->add_flag("--ml", ml, "Maximum likelihood instead of REML");
  fmt_opt(lmm);
  lmm->callback([&] {
    rc = run_lmm(an::frame_from_telemetry(an::ingest_telemetry(telemetry).rows), outcome, fixed, random, ml, format);
  });

  auto* lag = analyze->add_subcommand("lagged", "Next-session MIRS change on current-session predictors");
  lag->add_option("--telemetry", telemetry)->required()->check(CLI::ExistingFile);
  std::string lag_fixed = "reflection_char_length,mirs_overall";
  lag->add_option("--fixed", lag_fixed, "Comma-separated predictors");
  lag->add_option("--random", random, "both, learner or case");
  lag->add_flag("--ml", ml, "Maximum likelihood instead of REML");
  fmt_opt(lag);
  lag->callback([&] {
    auto changes = an::lagged_mirs_change(an::ingest_telemetry(telemetry).rows);
    rc = run_lmm(an::frame_from_lagged(changes), "delta_mirs", lag_fixed, random, ml, format);
  });

  // validate-scoring
  auto* vs = app.add_subcommand("validate-scoring", "Agreement between human and automated item scores");
  std::string human, ai;
  vs->add_option("--human", human)->required()->check(CLI::ExistingFile);
  vs->add_option("--ai", ai)->required()->check(CLI::ExistingFile);
  fmt_opt(vs);
  vs->callback([&] { rc = run_validate_scoring(human, ai, format); });

  // export
  auto* exp = app.add_subcommand("export", "Bulk export from a service data directory");
  std::string what, data_dir, salt, out_path;
  bool pseudo = false;
  exp->add_option("what", what)->required()->check(CLI::IsMember({"reports", "reflections", "telemetry"}));
  exp->add_option("--data-dir", data_dir)->required()->check(CLI::ExistingDirectory);
  exp->add_flag("--pseudonymize", pseudo, "Replace learner ids with keyed pseudonyms");
  exp->add_option("--salt", salt, "Pseudonym key (or MEDSIM_EXPORT_SALT)");
  exp->add_option("--out", out_path, "Write here instead of stdout");
  exp->callback([&] { rc = run_export(what, data_dir, pseudo, salt, out_path); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
