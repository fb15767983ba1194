#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "medsim/core/error.hpp"
#include "medsim/core/time.hpp"
#include "medsim/core/transcript.hpp"

namespace medsim::llm {

struct ChatMessage {
  Role role = Role::student;
  std::string content;
  TimePoint timestamp{};
};

struct GenerationParams {
  double temperature = 0.7;
  int max_reply_length = 600;  // code points
};

struct ChatExchange {
  std::string system_prompt;
  std::vector<ChatMessage> history;
  GenerationParams params;
};

struct ProviderResult {
  std::string content;
  std::int64_t latency_ms = 0;
  std::string provider_id;
  bool truncated = false;
};

// Codes: timeout, provider_unreachable, malformed_response.
class ProviderError : public Error {
 public:
  using Error::Error;
};

inline bool is_provider_error_code(const std::string& code) {
  return code == "timeout" || code == "provider_unreachable" || code == "malformed_response";
}

// Timestamps may tie but never go backwards; after any opening system
// messages the roles alternate student, patient, student, ...
inline void validate_exchange(const ChatExchange& ex) {
  if (ex.system_prompt.empty()) throw Error("invalid_exchange", "system prompt is empty");
  std::size_t i = 0;
  while (i < ex.history.size() && ex.history[i].role == Role::system) ++i;
  for (std::size_t k = i; k < ex.history.size(); ++k) {
    Role expected = (k - i) % 2 == 0 ? Role::student : Role::patient;
    if (ex.history[k].role != expected)
      throw Error("invalid_exchange", "message " + std::to_string(k) + " should be from the " + to_string(expected));
    if (ex.history[k].content.empty()) throw Error("invalid_exchange", "message " + std::to_string(k) + " is empty");
  }
  for (std::size_t k = 1; k < ex.history.size(); ++k)
    if (ex.history[k].timestamp < ex.history[k - 1].timestamp)
      throw Error("invalid_exchange", "history timestamps go backwards at message " + std::to_string(k));
}

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  // Throws ProviderError on timeout, unreachable endpoint or malformed reply.
  virtual ProviderResult complete(const ChatExchange& exchange) = 0;
  virtual std::string id() const = 0;
};

class Stopwatch {
 public:
  std::int64_t elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace medsim::llm
