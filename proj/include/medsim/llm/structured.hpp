#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "medsim/llm/provider.hpp"

namespace medsim::llm {

// First balanced {...} span that parses as a JSON object. Prose, code fences
// and earlier broken fragments are skipped.
inline std::optional<nlohmann::json> extract_first_json_object(std::string_view s) {
  for (std::size_t start = s.find('{'); start != std::string_view::npos; start = s.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < s.size(); ++i) {
      char c = s[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        auto parsed = nlohmann::json::parse(s.substr(start, i - start + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        break;
      }
    }
  }
  return std::nullopt;
}

enum class ItemStatus { ok, parse_failed, timeout, provider_error };

inline std::string to_string(ItemStatus s) {
  switch (s) {
    case ItemStatus::ok: return "ok";
    case ItemStatus::parse_failed: return "parse_failed";
    case ItemStatus::timeout: return "timeout";
    case ItemStatus::provider_error: return "provider_error";
  }
  return "?";
}

struct RawItemResult {
  ItemStatus status = ItemStatus::parse_failed;
  std::optional<int> score;  // empty with not_applicable or on failure
  bool not_applicable = false;
  std::string justification;
  std::vector<std::string> quotes;
  std::vector<std::string> diagnostics;  // one entry per failed attempt
  std::vector<std::string> raw_replies;  // kept for audit
  int attempts = 0;
  std::int64_t latency_ms = 0;
};

struct ParsedItemReply {
  std::optional<int> score;
  bool not_applicable = false;
  std::string justification;
  std::vector<std::string> quotes;
};

// Strict schema: score is an integer in [lo, hi] or "N/A"; justification is a
// string; quotes is an array of strings. Returns the error on violation.
inline std::optional<ParsedItemReply> parse_item_reply(std::string_view reply, std::string& error, int lo = 1,
                                                       int hi = 5) {
  auto obj = extract_first_json_object(reply);
  if (!obj) {
    error = "no JSON object found";
    return std::nullopt;
  }
  ParsedItemReply out;
  const auto& j = *obj;
  if (!j.contains("score")) {
    error = "missing score";
    return std::nullopt;
  }
  const auto& s = j["score"];
  if (s.is_string() && (s.get<std::string>() == "N/A" || s.get<std::string>() == "NA")) {
    out.not_applicable = true;
  } else if (s.is_number_integer()) {
    auto v = s.get<long long>();
    if (v < lo || v > hi) {
      error = "score " + std::to_string(v) + " outside " + std::to_string(lo) + ".." + std::to_string(hi);
      return std::nullopt;
    }
    out.score = static_cast<int>(v);
  } else {
    error = "score must be an integer or \"N/A\"";
    return std::nullopt;
  }
  if (!j.contains("justification") || !j["justification"].is_string()) {
    error = "justification must be a string";
    return std::nullopt;
  }
  out.justification = j["justification"].get<std::string>();
  if (!j.contains("quotes") || !j["quotes"].is_array()) {
    error = "quotes must be an array";
    return std::nullopt;
  }
  for (const auto& q : j["quotes"]) {
    if (!q.is_string()) {
      error = "quotes must contain strings";
      return std::nullopt;
    }
    out.quotes.push_back(q.get<std::string>());
  }
  return out;
}

struct ScoreOptions {
  int parse_retries = 2;
  int scale_min = 1;
  int scale_max = 5;
  GenerationParams params{0.0, 2000};
};

// Sends the scoring prompt and parses the reply, retrying on schema
// violations. Provider errors end the item immediately (the adapter already
// retried transport failures).
inline RawItemResult score_item(ChatProvider& provider, const std::string& prompt, const ScoreOptions& opt = {}) {
  RawItemResult out;
  Stopwatch watch;
  ChatExchange ex;
  ex.system_prompt = prompt;
  ex.params = opt.params;
  for (int attempt = 0; attempt <= opt.parse_retries; ++attempt) {
    ++out.attempts;
    ProviderResult reply;
    try {
      reply = provider.complete(ex);
    } catch (const ProviderError& e) {
      out.status = e.code() == "timeout" ? ItemStatus::timeout : ItemStatus::provider_error;
      out.diagnostics.push_back(e.code() + ": " + e.what());
      out.latency_ms = watch.elapsed_ms();
      return out;
    }
    out.raw_replies.push_back(reply.content);
    std::string error;
    if (auto parsed = parse_item_reply(reply.content, error, opt.scale_min, opt.scale_max)) {
      out.status = ItemStatus::ok;
      out.score = parsed->score;
      out.not_applicable = parsed->not_applicable;
      out.justification = std::move(parsed->justification);
      out.quotes = std::move(parsed->quotes);
      out.latency_ms = watch.elapsed_ms();
      return out;
    }
    out.diagnostics.push_back("attempt " + std::to_string(attempt + 1) + ": " + error);
  }
  out.status = ItemStatus::parse_failed;
  out.latency_ms = watch.elapsed_ms();
  return out;
}

}  // namespace medsim::llm
