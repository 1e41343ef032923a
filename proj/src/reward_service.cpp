#include "cabs/reward_service.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "httplib.h"

namespace cabs_eval::service {

namespace {

double parse_env_number(const char* name, const char* value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != std::string(value).size()) throw std::invalid_argument(name);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("environment variable is not a number: ") + name, name);
  }
}

std::size_t require_count(const Json& j, std::string_view key, const std::string& path) {
  const Json& v = schema::require_field(j, key, path);
  if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) {
    throw Error(ErrorCode::kSchemaViolation, "expected a positive integer", schema::join_path(path, key));
  }
  return v.get<std::size_t>();
}

llm::ModelConfig judge_from_json(const Json& j, llm::ModelConfig base, const std::string& path) {
  schema::require_object(j, path);
  schema::reject_unknown_keys(j, {"endpoint", "model", "api_key_env", "timeout_seconds", "max_retries"}, path);
  if (j.contains("endpoint")) base.endpoint = schema::require_string(j, "endpoint", path);
  if (j.contains("model")) base.model = schema::require_string(j, "model", path);
  if (j.contains("api_key_env")) base.api_key_env = schema::require_string(j, "api_key_env", path);
  if (j.contains("timeout_seconds")) base.timeout_seconds = schema::require_number(j, "timeout_seconds", path);
  if (j.contains("max_retries")) {
    const Json& v = j["max_retries"];
    if (!v.is_number_integer()) {
      throw Error(ErrorCode::kSchemaViolation, "expected integer", schema::join_path(path, "max_retries"));
    }
    base.max_retries = v.get<int>();
  }
  try {
    llm::validate(base);
  } catch (const Error& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what(), schema::join_path(path, e.path()));
  }
  return base;
}

Json match_summary(const MatchResult& m, std::size_t gt_count) {
  Json j = Json::object();
  j["hit_count"] = m.hit_count();
  j["fp_count"] = m.fp_count();
  j["pred_count"] = m.pred_count;
  j["gt_count"] = gt_count;
  Json js = Json::array();
  for (const auto& u : m.judgments) {
    js.push_back({{"name", u.name},
                  {"hit", u.hit},
                  {"location_match", u.location_match},
                  {"attribute_match", u.attribute_match}});
  }
  j["judgments"] = std::move(js);
  j["false_positives"] = m.false_positives;
  return j;
}

}  // namespace

ServiceConfig config_from_json(const Json& j, ServiceConfig base) {
  schema::require_object(j, "");
  schema::reject_unknown_keys(j,
                              {"bind_address", "port", "cache_dir", "judge", "reward", "advantage_epsilon", "beta",
                               "clip_epsilon", "max_inflight", "threads"},
                              "");
  if (j.contains("bind_address")) base.bind_address = schema::require_string(j, "bind_address", "");
  if (j.contains("port")) {
    const Json& p = j["port"];
    if (!p.is_number_unsigned() || p.get<unsigned>() > 65535) {
      throw Error(ErrorCode::kSchemaViolation, "port must lie in [0, 65535]", "port");
    }
    base.port = p.get<int>();
  }
  if (j.contains("cache_dir")) base.cache_dir = schema::require_string(j, "cache_dir", "");
  if (j.contains("judge")) base.judge = judge_from_json(j["judge"], base.judge.value_or(llm::ModelConfig{}), "judge");
  if (j.contains("reward")) base.reward = cabs_eval::config_from_json(j["reward"], base.reward, "reward");
  if (j.contains("advantage_epsilon")) {
    base.advantage_epsilon = schema::require_number(j, "advantage_epsilon", "");
    if (!(base.advantage_epsilon >= 0.0)) {
      throw Error(ErrorCode::kSchemaViolation, "advantage_epsilon must be >= 0", "advantage_epsilon");
    }
  }
  if (j.contains("beta")) base.objective.beta = schema::require_number(j, "beta", "");
  if (j.contains("clip_epsilon")) base.objective.clip_epsilon = schema::require_number(j, "clip_epsilon", "");
  try {
    grpo::validate(base.objective);
  } catch (const Error& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what(), e.path());
  }
  if (j.contains("max_inflight")) base.max_inflight = require_count(j, "max_inflight", "");
  if (j.contains("threads")) base.threads = require_count(j, "threads", "");
  return base;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(schema::parse_json_text(ss.str()));
}

ServiceConfig apply_env_overrides(ServiceConfig cfg, const std::function<const char*(const char*)>& getenv) {
  const auto get = [&](const char* name) -> const char* {
    const char* v = getenv ? getenv(name) : std::getenv(name);
    return (v != nullptr && *v != '\0') ? v : nullptr;
  };
  if (const char* v = get("CABS_SERVICE_BIND")) cfg.bind_address = v;
  if (const char* v = get("CABS_SERVICE_PORT")) {
    const double p = parse_env_number("CABS_SERVICE_PORT", v);
    if (p < 0 || p > 65535 || p != static_cast<int>(p)) {
      throw Error(ErrorCode::kInvalidArgument, "CABS_SERVICE_PORT out of range", "CABS_SERVICE_PORT");
    }
    cfg.port = static_cast<int>(p);
  }
  if (const char* v = get("CABS_CACHE_DIR")) cfg.cache_dir = v;
  const char* endpoint = get("CABS_LLM_ENDPOINT");
  const char* model = get("CABS_LLM_MODEL");
  if (endpoint || model) {
    llm::ModelConfig m = cfg.judge.value_or(llm::ModelConfig{});
    if (endpoint) m.endpoint = endpoint;
    if (model) m.model = model;
    cfg.judge = m;
  }
  if (const char* v = get("CABS_ALPHA")) cfg.reward.alpha = parse_env_number("CABS_ALPHA", v);
  if (const char* v = get("CABS_GAMMA")) cfg.reward.gamma = parse_env_number("CABS_GAMMA", v);
  if (const char* v = get("CABS_ADVANTAGE_EPSILON")) {
    cfg.advantage_epsilon = parse_env_number("CABS_ADVANTAGE_EPSILON", v);
  }
  if (const char* v = get("CABS_BETA")) cfg.objective.beta = parse_env_number("CABS_BETA", v);
  if (const char* v = get("CABS_CLIP_EPS")) cfg.objective.clip_epsilon = parse_env_number("CABS_CLIP_EPS", v);
  validate(cfg.reward);
  grpo::validate(cfg.objective);
  if (!(cfg.advantage_epsilon >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "advantage epsilon must be >= 0");
  return cfg;
}

GroupRequest parse_group_request(const Json& j, const ServiceConfig& defaults) {
  schema::require_object(j, "");
  schema::reject_unknown_keys(
      j, {"request_id", "gt_units", "rollouts", "reward_config", "advantage_epsilon", "matcher"}, "");
  GroupRequest req;
  req.request_id = schema::require_string(j, "request_id", "");
  req.gt_units = decomposition_from_json(schema::require_field(j, "gt_units", ""), "gt_units");
  const Json& rollouts = schema::require_array(j, "rollouts", "");
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const std::string path = schema::index_path("rollouts", i);
    if (rollouts[i].is_string()) {
      req.rollouts.emplace_back(rollouts[i].get<std::string>());
    } else if (rollouts[i].is_object()) {
      req.rollouts.emplace_back(decomposition_from_json(rollouts[i], path));
    } else {
      throw Error(ErrorCode::kSchemaViolation, "rollout must be a string or a decomposition object", path);
    }
  }
  req.reward = defaults.reward;
  if (j.contains("reward_config")) req.reward = cabs_eval::config_from_json(j["reward_config"], req.reward, "reward_config");
  req.advantage_epsilon = defaults.advantage_epsilon;
  if (j.contains("advantage_epsilon")) {
    req.advantage_epsilon = schema::require_number(j, "advantage_epsilon", "");
    if (!(req.advantage_epsilon >= 0.0)) {
      throw Error(ErrorCode::kSchemaViolation, "advantage_epsilon must be >= 0", "advantage_epsilon");
    }
  }
  if (j.contains("matcher")) {
    const auto m = schema::require_string(j, "matcher", "");
    if (m == "lexical") {
      req.matcher = MatcherKind::kLexical;
    } else if (m == "llm") {
      req.matcher = MatcherKind::kLlm;
    } else {
      throw Error(ErrorCode::kSchemaViolation, "matcher must be 'lexical' or 'llm'", "matcher");
    }
  }
  if (req.rollouts.size() < 2) {
    throw Error(ErrorCode::kGroupTooSmall, "group needs at least 2 rollouts, got " +
                                               std::to_string(req.rollouts.size()), "rollouts");
  }
  return req;
}

GroupResponse handle_group_request(const GroupRequest& req, llm::LlmClient* judge) {
  if (req.rollouts.size() < 2) {
    throw Error(ErrorCode::kGroupTooSmall, "group needs at least 2 rollouts", "rollouts");
  }
  if (req.matcher == MatcherKind::kLlm && judge == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "no judge model is configured for matcher 'llm'", "matcher");
  }
  GroupResponse resp;
  resp.request_id = req.request_id;
  resp.reward = req.reward;
  std::vector<MatchResult> matches(req.rollouts.size());
  if (req.matcher == MatcherKind::kLexical) {
    for (std::size_t i = 0; i < req.rollouts.size(); ++i) matches[i] = match_reports(req.gt_units, req.rollouts[i]);
  } else {
    // The client bounds in-flight judge calls, so fanning out is safe.
    std::vector<std::future<MatchResult>> futures;
    for (const auto& r : req.rollouts) {
      futures.push_back(std::async(std::launch::async, [&, r] { return match_reports(req.gt_units, r, *judge); }));
    }
    std::exception_ptr first;
    for (std::size_t i = 0; i < futures.size(); ++i) {
      try {
        matches[i] = futures[i].get();
      } catch (...) {
        if (!first) first = std::current_exception();
      }
    }
    if (first) std::rethrow_exception(first);
  }
  std::vector<double> totals;
  for (auto& m : matches) {
    RolloutResult r;
    r.breakdown = tif_reward(m, req.reward);
    r.match = std::move(m);
    totals.push_back(r.breakdown.total);
    resp.rollouts.push_back(std::move(r));
  }
  resp.scores = grpo::group_advantages(totals, req.advantage_epsilon);
  return resp;
}

Json response_to_json(const GroupResponse& r) {
  Json j = Json::object();
  j["request_id"] = r.request_id;
  Json rollouts = Json::array();
  for (std::size_t i = 0; i < r.rollouts.size(); ++i) {
    Json jr = Json::object();
    jr["index"] = i;
    jr["reward"] = breakdown_to_json(r.rollouts[i].breakdown);
    jr["match"] = match_summary(r.rollouts[i].match, r.rollouts[i].match.judgments.size());
    rollouts.push_back(std::move(jr));
  }
  j["rollouts"] = std::move(rollouts);
  j["rewards"] = r.scores.rewards;
  j["advantages"] = r.scores.advantages;
  j["group"] = {{"mu", r.scores.mu}, {"sigma", r.scores.sigma}, {"epsilon", r.scores.epsilon}};
  j["reward_config"] = config_to_json(r.reward);
  return j;
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedJson:
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kEmptyLabel:
    case ErrorCode::kEmptyReport:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidCounts:
      return 400;
    case ErrorCode::kGroupTooSmall:
      return 422;
    case ErrorCode::kAuthError:
    case ErrorCode::kExhaustedRetries:
    case ErrorCode::kResponseShape:
    case ErrorCode::kRequestRejected:
    case ErrorCode::kMatchFailed:
    case ErrorCode::kExtractionFailed:
    case ErrorCode::kUnparseable:
    case ErrorCode::kLengthMismatch:
      return 502;
    case ErrorCode::kTimeout:
      return 504;
    default:
      return 500;
  }
}

Json error_body(const Error& e) {
  Json j = Json::object();
  j["code"] = error_code_name(e.code());
  j["path"] = e.path();
  j["message"] = e.what();
  return j;
}

struct RewardService::Server {
  httplib::Server http;
  std::thread thread;
};

RewardService::RewardService(ServiceConfig cfg, std::shared_ptr<llm::Transport> transport)
    : cfg_(std::move(cfg)), server_(std::make_unique<Server>()) {
  validate(cfg_.reward);
  if (cfg_.judge) {
    auto cache = std::make_shared<llm::ResponseCache>(cfg_.cache_dir);
    llm::ClientOptions opts;
    opts.max_inflight = cfg_.max_inflight;
    judge_ = std::make_shared<llm::LlmClient>(*cfg_.judge, transport ? transport : llm::make_http_transport(),
                                              std::move(cache), opts);
  }
  auto& http = server_->http;
  const std::size_t threads = cfg_.threads;
  http.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  http.Post("/v1/reward/group", [this](const httplib::Request& req, httplib::Response& res) {
    const auto t0 = std::chrono::steady_clock::now();
    const HttpReply reply = handle_group(req.body);
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    // Timing travels in a header so bodies stay byte-identical.
    res.set_header("Server-Timing", "total;dur=" + std::to_string(ms));
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  http.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    const HttpReply reply = health();
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
}

RewardService::~RewardService() { stop(); }

HttpReply RewardService::handle_group(std::string_view body) const {
  try {
    const Json j = schema::parse_json_text(body);
    const GroupRequest req = parse_group_request(j, cfg_);
    return {200, response_to_json(handle_group_request(req, judge_.get())).dump()};
  } catch (const Error& e) {
    return {http_status_for(e.code()), error_body(e).dump()};
  } catch (const std::exception& e) {
    Json j = {{"code", "internal"}, {"path", ""}, {"message", e.what()}};
    return {500, j.dump()};
  }
}

HttpReply RewardService::health() const {
  Json j = Json::object();
  j["status"] = "ok";
  j["version"] = kVersion;
  Json backends = Json::array({"lexical"});
  if (judge_) backends.push_back("llm");
  j["matcher_backends"] = std::move(backends);
  return {200, j.dump()};
}

int RewardService::start() {
  auto& http = server_->http;
  int port = cfg_.port;
  if (port == 0) {
    port = http.bind_to_any_port(cfg_.bind_address);
    if (port < 0) throw Error(ErrorCode::kIo, "cannot bind " + cfg_.bind_address);
  } else if (!http.bind_to_port(cfg_.bind_address, port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + cfg_.bind_address + ":" + std::to_string(port));
  }
  server_->thread = std::thread([&http] { http.listen_after_bind(); });
  http.wait_until_ready();
  return port;
}

void RewardService::run() {
  if (!server_->http.listen(cfg_.bind_address, cfg_.port)) {
    throw Error(ErrorCode::kIo, "cannot listen on " + cfg_.bind_address + ":" + std::to_string(cfg_.port));
  }
}

void RewardService::stop() {
  if (!server_) return;
  server_->http.stop();
  if (server_->thread.joinable()) server_->thread.join();
}

}  // namespace cabs_eval::service
