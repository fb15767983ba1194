#pragma once

#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "medsim/case/prompt.hpp"
#include "medsim/core/hash.hpp"
#include "medsim/core/text.hpp"
#include "medsim/llm/provider.hpp"

namespace medsim::llm {

inline constexpr const char* kDeflection = "I'm not sure what you mean.";

// Tag -> utterance rules consulted when no fact matches (greetings, small talk).
struct PatientScriptRule {
  std::vector<std::string> tags;
  std::string reply;
};

struct PatientScript {
  std::vector<PatientScriptRule> rules;
  std::string fallback = kDeflection;
};

inline PatientScript load_patient_script(const std::string& path) {
  PatientScript s;
  try {
    auto root = YAML::LoadFile(path);
    for (const auto& r : root["responses"]) {
      PatientScriptRule rule;
      for (const auto& t : r["tags"]) rule.tags.push_back(text::to_lower(text::trim(t.as<std::string>())));
      rule.reply = r["reply"].as<std::string>();
      s.rules.push_back(std::move(rule));
    }
    if (root["fallback"]) s.fallback = root["fallback"].as<std::string>();
  } catch (const YAML::BadFile&) {
    throw Error("io_error", "cannot read patient script " + path);
  } catch (const YAML::Exception& e) {
    throw Error("invalid_script", path + ": " + e.what());
  }
  return s;
}

inline bool matches_any(const std::string& lowered, const std::vector<std::string>& tags) {
  for (const auto& t : tags)
    if (text::contains_word(lowered, t)) return true;
  return false;
}

// Deterministic offline provider. Patient prompts are answered from the fact
// table in the system prompt; rubric scoring prompts get a structured reply
// quoting the transcript verbatim.
class MockProvider : public ChatProvider {
 public:
  explicit MockProvider(PatientScript script = {}) : script_(std::move(script)) {}

  std::string id() const override { return "mock"; }

  ProviderResult complete(const ChatExchange& ex) override {
    Stopwatch watch;
    ProviderResult r;
    r.provider_id = id();
    if (text::starts_with(ex.system_prompt, cases::kScoringTaskMarker)) {
      r.content = score(ex.system_prompt);
    } else {
      validate_exchange(ex);
      r.content = patient_reply(ex);
      auto limit = static_cast<std::size_t>(std::max(1, ex.params.max_reply_length));
      if (text::code_points(r.content) > limit) {
        r.content = text::truncate_code_points(r.content, limit);
        r.truncated = true;
      }
    }
    r.latency_ms = watch.elapsed_ms();
    return r;
  }

  std::string patient_reply(const ChatExchange& ex) const {
    if (ex.history.empty() || ex.history.back().role != Role::student)
      throw Error("invalid_exchange", "the last message must come from the student");
    auto facts = cases::parse_fact_table(ex.system_prompt);
    auto policy = cases::parse_disclosure_policy(ex.system_prompt);
    std::string question = text::normalize_for_match(ex.history.back().content);

    std::vector<std::string> parts;
    for (const auto& f : facts)
      if (matches_any(question, f.tags)) parts.push_back(f.statement);

    if (!parts.empty() && policy == cases::DisclosurePolicy::forthcoming) {
      // Volunteer the first shareable fact not yet mentioned in the conversation.
      for (const auto& f : facts) {
        if (f.elicit_only || std::find(parts.begin(), parts.end(), f.statement) != parts.end()) continue;
        bool said = false;
        for (const auto& m : ex.history)
          said = said || (m.role == Role::patient && m.content.find(f.statement) != std::string::npos);
        if (!said) {
          parts.push_back(f.statement);
          break;
        }
      }
    }
    if (!parts.empty()) return text::join(parts, " ");
    for (const auto& rule : script_.rules)
      if (matches_any(question, rule.tags)) return rule.reply;
    return script_.fallback;
  }

  // Score grows with the number of student utterances; the quote is one whole
  // student line chosen by hashing the item id.
  static std::string score(const std::string& prompt) {
    auto parsed = cases::parse_scoring_prompt(prompt);
    if (!parsed) throw ProviderError("malformed_response", "mock scorer could not parse the prompt");
    std::vector<std::string> student;
    for (const auto& u : parsed->transcript)
      if (u.role == Role::student) student.push_back(u.content);
    nlohmann::json reply;
    if (student.empty()) {
      reply = {{"score", 1}, {"justification", "The student did not speak."}, {"quotes", nlohmann::json::array()}};
    } else {
      auto h = fnv1a(parsed->item_id);
      int base = 1 + static_cast<int>(std::min<std::size_t>(student.size() / 3, 4));
      int jitter = static_cast<int>(h % 3) - 1;
      int s = std::clamp(base + jitter, 1, 5);
      const auto& quote = student[h % student.size()];
      reply = {{"score", s},
               {"justification", "Rated against the anchors for " + parsed->item_title + "."},
               {"quotes", {quote}}};
    }
    return "Here is my rating.\n```json\n" + reply.dump() + "\n```";
  }

 private:
  PatientScript script_;
};

// Returns queued replies or errors in order; for fault injection in tests.
class ScriptedProvider : public ChatProvider {
 public:
  using Step = std::function<ProviderResult(const ChatExchange&)>;

  std::string id() const override { return "scripted"; }

  void reply(std::string content) {
    push([content](const ChatExchange&) { return ProviderResult{content, 0, "scripted", false}; });
  }
  void fail(std::string code, std::string message = "injected failure") {
    push([code, message](const ChatExchange&) -> ProviderResult { throw ProviderError(code, message); });
  }
  void push(Step s) {
    std::lock_guard lock(mu_);
    steps_.push_back(std::move(s));
  }
  // Used once the queue is empty; by default an error.
  void set_fallback(Step s) {
    std::lock_guard lock(mu_);
    fallback_ = std::move(s);
  }
  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

  ProviderResult complete(const ChatExchange& ex) override {
    Step step;
    {
      std::lock_guard lock(mu_);
      ++calls_;
      if (!steps_.empty()) {
        step = std::move(steps_.front());
        steps_.pop_front();
      } else {
        step = fallback_;
      }
    }
    if (!step) throw ProviderError("provider_unreachable", "scripted provider has no more replies");
    return step(ex);
  }

 private:
  mutable std::mutex mu_;
  std::deque<Step> steps_;
  Step fallback_;
  std::size_t calls_ = 0;
};

}  // namespace medsim::llm
