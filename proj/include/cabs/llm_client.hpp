#pragma once

// Chat-completion client for the extraction, matching and MCQ judges:
// prompt rendering, retrying transport, content-addressed response cache,
// and strict JSON response validation.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cabs/core.hpp"
#include "cabs/matching.hpp"
#include "cabs/mcq.hpp"

namespace cabs_eval::llm {

// ---------------------------------------------------------------------------
// Prompts

enum class PromptTemplate { kExtract, kMatch, kMcq };

using Bindings = std::map<std::string, std::string, std::less<>>;

std::string_view template_text(PromptTemplate t);
std::vector<std::string> required_bindings(PromptTemplate t);

/// Single-pass replacement of `{name}` for every bound name. Unbound
/// brace groups (JSON examples in the templates) are left untouched, and
/// substituted values are never rescanned.
std::string substitute(std::string_view text, const Bindings& bindings);

/// Throws kMissingBinding naming the first unbound placeholder.
std::string render_prompt(PromptTemplate t, const Bindings& bindings);

// ---------------------------------------------------------------------------
// Transport

struct ModelConfig {
  std::string endpoint;  ///< full chat-completions URL
  std::string model;
  std::string api_key_env = "CABS_LLM_API_KEY";
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double temperature = 0.0;
  std::chrono::milliseconds initial_backoff{500};
};

/// Throws kInvalidArgument on non-positive timeout, negative retries, or a
/// non-zero temperature.
void validate(const ModelConfig& cfg);

struct HttpRequest {
  std::string url;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
  double timeout_seconds = 60.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  bool timed_out = false;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib backed transport (http:// and https://).
std::shared_ptr<Transport> make_http_transport();

// ---------------------------------------------------------------------------
// Cache

/// Hex SHA-256 over the canonical JSON of (model, prompt, temperature).
/// Distinct triples collide with probability about n^2 / 2^257 for n
/// cached entries, which is negligible for any realistic corpus.
std::string cache_key(std::string_view model, std::string_view prompt, double temperature);

/// Thread-safe response cache. With a directory, entries persist as
/// {key}.json holding {request_digest, response_text, timestamp}.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir = {});

  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const std::string& response_text);

  /// Keys read or written during this process, sorted.
  std::vector<std::string> touched_keys() const;

  /// Writes {"entries": [keys...]} so a run can be replayed from the cache.
  void write_manifest(const std::filesystem::path& path) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> memory_;
  std::set<std::string> touched_;
};

// ---------------------------------------------------------------------------
// Client

struct ClientOptions {
  std::size_t max_inflight = 8;
  /// Backoff sleep hook; tests substitute a recorder.
  std::function<void(std::chrono::milliseconds)> sleep;
};

class LlmClient {
 public:
  LlmClient(ModelConfig config, std::shared_ptr<Transport> transport,
            std::shared_ptr<ResponseCache> cache, ClientOptions options = {});

  /// Returns choices[0].message.content. Concurrent calls for the same
  /// prompt share one network request. Retries 429/5xx/timeouts with
  /// exponential backoff. Throws kAuthError (401/403), kRequestRejected
  /// (other 4xx), kResponseShape, kExhaustedRetries, or kTimeout when the
  /// final attempt timed out.
  std::string complete(const std::string& prompt);

  const ModelConfig& config() const { return config_; }
  std::size_t network_calls() const { return network_calls_.load(); }
  std::size_t max_observed_inflight() const { return max_observed_inflight_.load(); }

 private:
  std::string fetch(const std::string& prompt);

  ModelConfig config_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  ClientOptions options_;
  std::counting_semaphore<1024> slots_;
  std::mutex inflight_mu_;
  std::map<std::string, std::shared_future<std::string>> inflight_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> current_inflight_{0};
  std::atomic<std::size_t> max_observed_inflight_{0};
};

// ---------------------------------------------------------------------------
// Response validation

enum class ResponseSchema { kDecomposition, kMatch, kMcq };

using ParsedResponse = std::variant<ReportDecomposition, DecodedMatch, mcq::McqSet>;

/// Removes one surrounding ``` fence (with optional language tag).
std::string strip_code_fence(std::string_view text);

/// Strict: after fence stripping the text must be exactly one JSON value
/// matching the schema. Throws kUnparseable or kSchemaViolation.
ParsedResponse parse_json_response(std::string_view text, ResponseSchema schema);

/// complete() + parse_json_response(); on a validation failure issues one
/// strict reprompt carrying the error, then rethrows. `extra_check` may add
/// caller-specific rules; it signals failure by throwing Error.
ParsedResponse complete_validated(LlmClient& client, const std::string& prompt, ResponseSchema schema,
                                  const std::function<void(const ParsedResponse&)>& extra_check = {});

}  // namespace cabs_eval::llm
