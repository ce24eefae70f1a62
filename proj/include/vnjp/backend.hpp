#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "vnjp/errors.hpp"
#include "vnjp/prompt.hpp"
#include "vnjp/unicode.hpp"

namespace vnjp {

/// One backend call. `temperature` is validated by the caller;
/// refine_flagged only ever issues 0.7 and 0.85, the baseline path 0.0.
struct GenerationRequest {
  PromptBundle prompt;
  double temperature = 0.7;
  int max_new_tokens = 1024;
  std::optional<std::uint64_t> seed;
};

struct GenerationResult {
  std::string raw_output;
  std::string final_translation;
  double temperature = 0.0;
  std::string backend_id;
  std::uint64_t latency_ms = 0;
};

/// Behavior contract: complete() returns the raw model text (reasoning plus
/// FINAL: line) or throws TransportError; id() is stable per backend.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string complete(const GenerationRequest& request) = 0;
  virtual std::string id() const = 0;
};

/// Offline deterministic backend: the translation is the query with its
/// codepoints reversed plus a temperature tag, so every downstream file is
/// a pure function of the inputs and golden tests can predict output
/// exactly.
class MockBackend : public GenerationBackend {
 public:
  std::string complete(const GenerationRequest& request) override {
    return "Reading the Vietnamese sentence.\n"
           "Rendering each word in order.\n"
           "FINAL: " + mock_translation(request.prompt.query_vi, request.temperature) + "\n";
  }

  std::string id() const override { return "mock"; }

  /// The rule tests predict against: codepoint-reversed query + " (t=X.XX)".
  static std::string mock_translation(std::string_view query_vi, double temperature) {
    std::u32string cps = uni::decode_utf8(query_vi);
    std::reverse(cps.begin(), cps.end());
    char tag[16];
    std::snprintf(tag, sizeof(tag), " (t=%.2f)", temperature);
    return uni::encode_utf8(cps) + tag;
  }
};

/// Chat-completions wire settings. The API key comes from the environment,
/// never from the config file.
struct HttpBackendConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string response_path = "choices.0.message.content";
  int timeout_ms = 30000;
};

inline constexpr const char* api_key_env_var = "VNJP_API_KEY";

/// POSTs {model, messages, temperature, max_tokens, seed?} and pulls the
/// generated text out of the response at a dotted path. Timeouts, 5xx and
/// 429 are retryable; other failures are not.
class HttpBackend : public GenerationBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("backend base_url is not set");
    if (const char* key = std::getenv(api_key_env_var)) api_key_ = key;
  }

  std::string complete(const GenerationRequest& request) override {
    nlohmann::ordered_json body;
    body["model"] = config_.model;
    nlohmann::ordered_json messages = nlohmann::ordered_json::array();
    if (!request.prompt.system_text.empty()) {
      messages.push_back({{"role", "system"}, {"content", request.prompt.system_text}});
    }
    messages.push_back({{"role", "user"}, {"content", request.prompt.user_text}});
    body["messages"] = std::move(messages);
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_new_tokens;
    if (request.seed) body["seed"] = *request.seed;

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    httplib::Result res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
      throw TransportError("backend request failed: " + httplib::to_string(res.error()),
                           /*retryable=*/true);
    }
    if (res->status == 429 || res->status >= 500) {
      throw TransportError("backend returned HTTP " + std::to_string(res->status),
                           /*retryable=*/true);
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("backend returned HTTP " + std::to_string(res->status),
                           /*retryable=*/false);
    }
    return extract_response_text(res->body);
  }

  std::string id() const override { return "http:" + config_.model; }

 private:
  std::string extract_response_text(const std::string& body) const {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw TransportError(std::string("backend response is not JSON: ") + e.what(),
                           /*retryable=*/false);
    }
    const nlohmann::ordered_json* node = &j;
    std::size_t start = 0;
    const std::string& path = config_.response_path;
    while (start <= path.size()) {
      std::size_t end = path.find('.', start);
      if (end == std::string::npos) end = path.size();
      const std::string key = path.substr(start, end - start);
      if (!key.empty() && key.find_first_not_of("0123456789") == std::string::npos) {
        const std::size_t idx = std::stoul(key);
        if (!node->is_array() || idx >= node->size()) node = nullptr;
        else node = &(*node)[idx];
      } else {
        if (!node->is_object() || !node->contains(key)) node = nullptr;
        else node = &(*node)[key];
      }
      if (!node) {
        throw TransportError("backend response has no text at " + path, /*retryable=*/false);
      }
      if (end == path.size()) break;
      start = end + 1;
    }
    if (!node->is_string()) {
      throw TransportError("backend response field " + path + " is not a string",
                           /*retryable=*/false);
    }
    return node->get<std::string>();
  }

  HttpBackendConfig config_;
  std::string api_key_;
};

/// Bounded retry on retryable TransportError only: delays of
/// base_delay * 2^attempt between tries, max_retries + 1 calls in total.
struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

inline void default_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

inline std::string complete_with_retry(GenerationBackend& backend,
                                       const GenerationRequest& request,
                                       const RetryPolicy& policy = {},
                                       const SleepFn& sleep_fn = default_sleep) {
  for (int attempt = 0;; ++attempt) {
    try {
      return backend.complete(request);
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= policy.max_retries) throw;
      sleep_fn(policy.base_delay * (1LL << attempt));
    }
  }
}

}  // namespace vnjp
