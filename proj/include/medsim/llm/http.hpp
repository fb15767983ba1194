#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "medsim/llm/provider.hpp"

namespace medsim::llm {

struct HttpProviderConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";  // name of the variable, never the key
  int timeout_ms = 60000;
  int retries = 2;        // transport retries after the first attempt
  int backoff_ms = 250;   // doubled per retry
  int max_concurrency = 8;
};

// OpenAI-compatible chat-completions adapter. Student turns are sent as
// "user", patient turns as "assistant".
class HttpChatProvider : public ChatProvider {
 public:
  explicit HttpChatProvider(HttpProviderConfig cfg)
      : cfg_(std::move(cfg)), slots_(std::max(1, std::min(cfg_.max_concurrency, 64))) {
    auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw Error("invalid_config", "provider endpoint needs a scheme");
    auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    origin_ = cfg_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (origin_.rfind("https://", 0) == 0) throw Error("invalid_config", "built without TLS support");
#endif
  }

  std::string id() const override { return "http:" + cfg_.model; }

  static nlohmann::json request_body(const ChatExchange& ex, const std::string& model) {
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "system"}, {"content", ex.system_prompt}});
    for (const auto& m : ex.history)
      messages.push_back({{"role", m.role == Role::student ? "user" : m.role == Role::patient ? "assistant" : "system"},
                          {"content", m.content}});
    if (ex.history.empty()) messages.push_back({{"role", "user"}, {"content", "Respond now."}});
    // Roughly four characters per token.
    int max_tokens = std::max(16, ex.params.max_reply_length / 4 + 16);
    return {{"model", model}, {"messages", messages}, {"temperature", ex.params.temperature}, {"max_tokens", max_tokens}};
  }

  static ProviderResult parse_response(const std::string& body, const std::string& provider_id) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
      throw ProviderError("malformed_response", "response has no choices");
    const auto& choice = j["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string())
      throw ProviderError("malformed_response", "choice has no message content");
    ProviderResult r;
    r.content = choice["message"]["content"].get<std::string>();
    if (r.content.empty()) throw ProviderError("malformed_response", "empty completion");
    r.truncated = choice.value("finish_reason", "") == "length";
    r.provider_id = provider_id;
    return r;
  }

  ProviderResult complete(const ChatExchange& ex) override {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    std::string body = request_body(ex, cfg_.model).dump();
    Stopwatch watch;
    std::string last_code = "provider_unreachable", last_message;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
      slots_.acquire();
      httplib::Result res = [&] {
        httplib::Client cli(origin_);
        auto t = std::chrono::milliseconds(cfg_.timeout_ms);
        cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(t).count(),
                                   static_cast<long>((t % std::chrono::seconds(1)).count() * 1000));
        cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(t).count(),
                             static_cast<long>((t % std::chrono::seconds(1)).count() * 1000));
        httplib::Headers headers;
        if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
        return cli.Post(path_, headers, body, "application/json");
      }();
      slots_.release();
      if (!res) {
        auto err = res.error();
        // A connect that never completes is an unreachable endpoint; a reply
        // that does not arrive in time is a timeout.
        last_code = err == httplib::Error::Read ? "timeout" : "provider_unreachable";
        last_message = httplib::to_string(err);
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_code = "provider_unreachable";
        last_message = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw ProviderError("provider_unreachable", "HTTP " + std::to_string(res->status) + " from provider");
      auto r = parse_response(res->body, id());
      r.latency_ms = watch.elapsed_ms();
      return r;
    }
    throw ProviderError(last_code, last_message + " after " + std::to_string(cfg_.retries + 1) + " attempts");
  }

 private:
  HttpProviderConfig cfg_;
  std::counting_semaphore<64> slots_;
  std::string origin_, path_;
};

}  // namespace medsim::llm
