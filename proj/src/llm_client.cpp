#include "cabs/llm_client.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"

#include "cabs/text.hpp"

namespace cabs_eval::llm {

namespace {

constexpr std::string_view kExtractTemplate = R"(You extract abnormal findings from one CT report and return them as JSON.

Report text:
{report}

What counts as an abnormality: any disease, abnormal imaging finding or structural change the report states as present (for example pneumonia, fatty liver, nodule, ground-glass opacity, effusion, calcification, enlargement, stenosis).

Leave out:
- findings that are negated or ruled out ("no", "not seen", "negative for");
- normal anatomy and normal findings;
- statements about scan technique, image quality or limitations;
- recommendations and follow-up plans.

Rules:
- Only report what the text states. Never infer or add findings.
- Keep hedged findings ("possible", "cannot exclude", "consider") as possible, never definite.
- If several sentences describe the same abnormality, output one entity.
- A single statement about one concept ("multiple small nodules in both lungs") is one entity unless separate lesions are named.

Fields of each entity:
- name: standardized abnormality name only, with no location, size, severity or modifiers (e.g. "nodule", "fatty liver").
- evidence: a short span copied verbatim from the report.
- location: the anatomical location as written, or "" if none.
- attributes: size, number, extent, density, morphology, severity or change over time, or "" if none.
- certainty: "definite" or "possible".
- organ: one of trachea, heart, lung, esophagus, vessel, spine, liver, pancreas, spleen, stomach, bowel, kidney, other.

Also set report_has_abnormality to true when the list is non-empty and false otherwise.

Return exactly one JSON object and nothing else, in this shape:
{
  "abnormalities": [
    {
      "name": "nodule",
      "evidence": "A small nodule is seen in the right upper lobe",
      "location": "right upper lobe",
      "attributes": "small",
      "certainty": "definite",
      "organ": "lung"
    }
  ],
  "report_has_abnormality": true
}
)";

constexpr std::string_view kMatchTemplate = R"(You compare reference abnormalities from a CT report with a predicted CT report and return one JSON object.

Reference abnormalities (JSON, use as given; do not edit, merge, split or extend them):
{gt}

Predicted report:
{pred}

Step 1. Extract the abnormalities stated in the predicted report, with the same definition as the reference: skip negated, normal, technical and purely interpretive statements. Names carry no location, severity or modifiers.

Step 2. Match each reference abnormality to at most one predicted abnormality by meaning. Medically equivalent wording matches; broader or inferred concepts do not. Set hit to true when a match exists, false otherwise. Every predicted abnormality left unmatched is a false positive.

Step 3. For each reference abnormality:
- location_match: true when the predicted location agrees medically with the reference location, or when neither gives a location. Must be false when hit is false.
- attribute_match: true when the predicted attributes agree medically with the reference attributes, or when neither gives attributes. Must be false when hit is false.
Do not fill in missing locations or attributes.

Output one entry per reference abnormality, in reference order, plus all false positives. Return exactly one JSON object and nothing else:
{
  "abnormalities": [
    {"name": "<reference name>", "hit": true, "location_match": true, "attribute_match": false}
  ],
  "false_positive": [
    {"name": "<unmatched predicted name>"}
  ]
}
)";

constexpr std::string_view kMcqTemplate = R"(Write English multiple-choice questions about a chest CT examination.

The person answering sees only the CT images. The abnormality below comes from labels they never see, so every question must be answerable from the images and must not reveal or quote any label text.

Target abnormality (JSON):
{abnormality_json}

Name of an abnormality absent from this examination:
{negative_name}

Produce 2 to 4 items:
- existence_positive (exactly one): asks whether the target abnormality is visible, e.g. "On this chest CT, is there a '<name>' abnormality?". Options are "Yes" and "No" in either order; the answer is the Yes option.
- existence_negative (exactly one): the same question for the absent abnormality; the answer is the No option.
- location (only if the target location is non-empty): asks where the abnormality mainly lies. Exactly four anatomical location options, one of them consistent with the target location.
- attribute (only if the target attributes are non-empty): asks how the abnormality looks. Exactly four imaging-appearance options, one of them consistent with the target attributes.

Wording: phrase every question around the image ("On this chest CT ...", "In this examination ..."). Never use the words report, findings or impression. Options read as visual observations.

Options carry letter prefixes ("A. ", "B. ", ...) and answer holds the letter only. Return exactly one JSON object and nothing else:
{
  "items": [
    {
      "type": "existence_positive",
      "question": "On this chest CT, is there a 'nodule' abnormality?",
      "options": ["A. Yes", "B. No"],
      "answer": "A"
    }
  ]
}
)";

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "endpoint must be an absolute URL");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    const auto url = split_url(request.url);
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration<double>(request.timeout_seconds);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(secs);
    client.set_connection_timeout(ms);
    client.set_read_timeout(ms);
    client.set_write_timeout(ms);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) {
      if (k != "Content-Type") headers.emplace(k, v);
    }
    auto res = client.Post(url.path, headers, request.body, "application/json");
    HttpResponse out;
    if (!res) {
      const auto err = res.error();
      out.timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  }
};

bool retryable(const HttpResponse& r) { return r.timed_out || r.status == 0 || r.status == 429 || r.status >= 500; }

std::string extract_content(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception&) {
    throw Error(ErrorCode::kResponseShape, "chat-completion body is not JSON");
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw Error(ErrorCode::kResponseShape, "response lacks choices[0]", "choices");
  }
  const Json& c = j["choices"][0];
  if (!c.is_object() || !c.contains("message") || !c["message"].is_object() ||
      !c["message"].contains("content") || !c["message"]["content"].is_string()) {
    throw Error(ErrorCode::kResponseShape, "response lacks a string message content", "choices[0].message.content");
  }
  return c["message"]["content"].get<std::string>();
}

}  // namespace

std::string_view template_text(PromptTemplate t) {
  switch (t) {
    case PromptTemplate::kExtract: return kExtractTemplate;
    case PromptTemplate::kMatch: return kMatchTemplate;
    case PromptTemplate::kMcq: return kMcqTemplate;
  }
  return {};
}

std::vector<std::string> required_bindings(PromptTemplate t) {
  switch (t) {
    case PromptTemplate::kExtract: return {"report"};
    case PromptTemplate::kMatch: return {"gt", "pred"};
    case PromptTemplate::kMcq: return {"abnormality_json", "negative_name"};
  }
  return {};
}

std::string substitute(std::string_view text, const Bindings& bindings) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = bindings.find(text.substr(i + 1, close - i - 1));
        if (it != bindings.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

std::string render_prompt(PromptTemplate t, const Bindings& bindings) {
  for (const auto& name : required_bindings(t)) {
    if (!bindings.count(name)) throw Error(ErrorCode::kMissingBinding, "unbound placeholder", name);
  }
  return substitute(template_text(t), bindings);
}

void validate(const ModelConfig& cfg) {
  if (!(cfg.timeout_seconds > 0.0)) throw Error(ErrorCode::kInvalidArgument, "timeout must be > 0", "timeout_seconds");
  if (cfg.max_retries < 0) throw Error(ErrorCode::kInvalidArgument, "retries must be >= 0", "max_retries");
  if (cfg.temperature != 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "judge calls run at temperature 0", "temperature");
  }
  if (cfg.initial_backoff.count() < 0) {
    throw Error(ErrorCode::kInvalidArgument, "backoff must be >= 0", "initial_backoff");
  }
}

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

std::string cache_key(std::string_view model, std::string_view prompt, double temperature) {
  Json j = Json::object();
  j["model"] = model;
  j["prompt"] = prompt;
  j["temperature"] = temperature;
  const std::string canonical = j.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create cache directory " + dir_.string());
  }
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
  std::lock_guard lock(mu_);
  if (auto it = memory_.find(key); it != memory_.end()) {
    touched_.insert(key);
    return it->second;
  }
  if (dir_.empty()) return std::nullopt;
  std::ifstream in(dir_ / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    const Json j = Json::parse(ss.str());
    if (j.value("request_digest", std::string{}) != key || !j.contains("response_text") ||
        !j["response_text"].is_string()) {
      return std::nullopt;
    }
    auto text = j["response_text"].get<std::string>();
    memory_[key] = text;
    touched_.insert(key);
    return text;
  } catch (const Json::exception&) {
    return std::nullopt;  // a torn or foreign file is a miss
  }
}

void ResponseCache::put(const std::string& key, const std::string& response_text) {
  std::lock_guard lock(mu_);
  memory_[key] = response_text;
  touched_.insert(key);
  if (dir_.empty()) return;
  Json j = Json::object();
  j["request_digest"] = key;
  j["response_text"] = response_text;
  j["timestamp"] = iso_timestamp();
  const auto final_path = dir_ / (key + ".json");
  const auto tmp = dir_ / (key + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write cache entry " + tmp.string());
    out << j.dump(2) << '\n';
  }
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot commit cache entry " + final_path.string());
}

std::vector<std::string> ResponseCache::touched_keys() const {
  std::lock_guard lock(mu_);
  return {touched_.begin(), touched_.end()};
}

void ResponseCache::write_manifest(const std::filesystem::path& path) const {
  Json j = Json::object();
  j["entries"] = touched_keys();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

LlmClient::LlmClient(ModelConfig config, std::shared_ptr<Transport> transport,
                     std::shared_ptr<ResponseCache> cache, ClientOptions options)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      options_(std::move(options)),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options_.max_inflight, 1, 1024))) {
  validate(config_);
  if (!transport_) throw Error(ErrorCode::kInvalidArgument, "transport is required");
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string LlmClient::complete(const std::string& prompt) {
  const std::string key = cache_key(config_.model, prompt, config_.temperature);
  if (auto hit = cache_->get(key)) return *hit;

  std::promise<std::string> promise;
  {
    std::unique_lock lock(inflight_mu_);
    if (auto it = inflight_.find(key); it != inflight_.end()) {
      auto fut = it->second;
      lock.unlock();
      return fut.get();
    }
    // The leader publishes to the cache before leaving the map, so a
    // second look here closes the miss-then-finished race.
    if (auto hit = cache_->get(key)) return *hit;
    inflight_.emplace(key, promise.get_future().share());
  }

  std::string text;
  std::exception_ptr failure;
  try {
    text = fetch(prompt);
    cache_->put(key, text);
    promise.set_value(text);
  } catch (...) {
    failure = std::current_exception();
    promise.set_exception(failure);
  }
  {
    std::lock_guard lock(inflight_mu_);
    inflight_.erase(key);
  }
  if (failure) std::rethrow_exception(failure);
  return text;
}

std::string LlmClient::fetch(const std::string& prompt) {
  Json body = Json::object();
  body["model"] = config_.model;
  body["messages"] = Json::array({Json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config_.temperature;

  HttpRequest req;
  req.url = config_.endpoint;
  req.body = body.dump();
  req.timeout_seconds = config_.timeout_seconds;
  req.headers.emplace_back("Content-Type", "application/json");
  if (const char* k = std::getenv(config_.api_key_env.c_str()); k != nullptr && *k != '\0') {
    req.headers.emplace_back("Authorization", std::string("Bearer ") + k);
  }

  auto backoff = config_.initial_backoff;
  HttpResponse last;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      options_.sleep(backoff);
      backoff *= 2;
    }
    slots_.acquire();
    const auto now = ++current_inflight_;
    auto seen = max_observed_inflight_.load();
    while (now > seen && !max_observed_inflight_.compare_exchange_weak(seen, now)) {
    }
    ++network_calls_;
    try {
      last = transport_->post(req);
    } catch (...) {
      --current_inflight_;
      slots_.release();
      throw;
    }
    --current_inflight_;
    slots_.release();

    if (last.status == 200) return extract_content(last.body);
    if (last.status == 401 || last.status == 403) {
      throw Error(ErrorCode::kAuthError, "endpoint rejected credentials (HTTP " + std::to_string(last.status) + ")");
    }
    if (!retryable(last)) {
      throw Error(ErrorCode::kRequestRejected, "endpoint returned HTTP " + std::to_string(last.status));
    }
  }
  if (last.timed_out) {
    throw Error(ErrorCode::kTimeout, "judge request timed out after " + std::to_string(config_.max_retries + 1) +
                                         " attempts");
  }
  throw Error(ErrorCode::kExhaustedRetries, "judge request failed after " +
                                                std::to_string(config_.max_retries + 1) + " attempts (last HTTP " +
                                                std::to_string(last.status) + ")");
}

std::string strip_code_fence(std::string_view text) {
  std::string t = trim(text);
  if (t.rfind("```", 0) != 0) return t;
  const auto first_nl = t.find('\n');
  if (first_nl == std::string::npos) return t;
  const auto close = t.rfind("```");
  if (close == std::string::npos || close <= first_nl) return t;
  return trim(std::string_view(t).substr(first_nl + 1, close - first_nl - 1));
}

ParsedResponse parse_json_response(std::string_view text, ResponseSchema schema) {
  const std::string body = strip_code_fence(text);
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kUnparseable, std::string("reply is not a single JSON value: ") + e.what());
  }
  try {
    switch (schema) {
      case ResponseSchema::kDecomposition: return decomposition_from_json(j, "");
      case ResponseSchema::kMatch: return match_from_json(j, "");
      case ResponseSchema::kMcq: return mcq::set_from_json(j, "");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchemaViolation) throw;
    throw Error(ErrorCode::kSchemaViolation, e.what(), e.path());
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown response schema");
}

ParsedResponse complete_validated(LlmClient& client, const std::string& prompt, ResponseSchema schema,
                                  const std::function<void(const ParsedResponse&)>& extra_check) {
  auto attempt = [&](const std::string& p) {
    auto parsed = parse_json_response(client.complete(p), schema);
    if (extra_check) extra_check(parsed);
    return parsed;
  };
  try {
    return attempt(prompt);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUnparseable && e.code() != ErrorCode::kSchemaViolation) throw;
    std::string strict = prompt;
    strict += "\n\nYour previous reply was rejected (";
    strict += error_code_name(e.code());
    if (!e.path().empty()) strict += " at " + e.path();
    strict += ": ";
    strict += e.what();
    strict += "). Reply with exactly one JSON object that follows the required shape, with no code fences, "
              "comments or other text.";
    return attempt(strict);
  }
}

}  // namespace cabs_eval::llm
