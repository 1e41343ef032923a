#pragma once

// HTTP front end that scores a group of rollouts against one ground-truth
// decomposition and returns per-rollout reward terms plus group-relative
// advantages.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cabs/core.hpp"
#include "cabs/grpo.hpp"
#include "cabs/llm_client.hpp"
#include "cabs/matching.hpp"
#include "cabs/tif_reward.hpp"

namespace cabs_eval::service {

inline constexpr std::string_view kVersion = "0.3.0";

struct ServiceConfig {
  std::string bind_address = "127.0.0.1";
  int port = 8088;
  std::filesystem::path cache_dir;          ///< empty: in-memory judge cache
  std::optional<llm::ModelConfig> judge;    ///< enables matcher "llm"
  RewardConfig reward;
  double advantage_epsilon = grpo::kDefaultAdvantageEpsilon;
  grpo::ObjectiveConfig objective;
  std::size_t max_inflight = 8;
  std::size_t threads = 8;
};

/// Strict JSON form; unknown keys rejected. Missing keys keep `base` values.
ServiceConfig config_from_json(const Json& j, ServiceConfig base = {});
ServiceConfig load_config(const std::filesystem::path& path);

/// Applies CABS_SERVICE_BIND, CABS_SERVICE_PORT, CABS_CACHE_DIR,
/// CABS_LLM_ENDPOINT, CABS_LLM_MODEL, CABS_ALPHA, CABS_GAMMA,
/// CABS_ADVANTAGE_EPSILON, CABS_BETA, CABS_CLIP_EPS. `getenv` is injectable
/// for tests.
ServiceConfig apply_env_overrides(ServiceConfig cfg,
                                  const std::function<const char*(const char*)>& getenv = {});

enum class MatcherKind { kLexical, kLlm };

struct GroupRequest {
  std::string request_id;
  ReportDecomposition gt_units;
  std::vector<Prediction> rollouts;
  RewardConfig reward;
  double advantage_epsilon = grpo::kDefaultAdvantageEpsilon;
  MatcherKind matcher = MatcherKind::kLexical;
};

/// Request body: {request_id, gt_units, rollouts, reward_config?,
/// advantage_epsilon?, matcher?}. Each rollout is a string or a
/// decomposition object. Throws kMalformedJson, kSchemaViolation (with
/// path), kGroupTooSmall.
GroupRequest parse_group_request(const Json& j, const ServiceConfig& defaults);

struct RolloutResult {
  MatchResult match;
  RewardBreakdown breakdown;
};

struct GroupResponse {
  std::string request_id;
  std::vector<RolloutResult> rollouts;
  grpo::GroupScores scores;
  RewardConfig reward;
};

/// extract (text rollouts) -> match -> reward per rollout, then advantages
/// over the totals. `judge` is required for MatcherKind::kLlm.
GroupResponse handle_group_request(const GroupRequest& req, llm::LlmClient* judge);

Json response_to_json(const GroupResponse& r);

/// HTTP status for a library error: 400 input, 422 group size, 502 judge
/// backend, 504 judge timeout, 500 otherwise.
int http_status_for(ErrorCode code);

/// {"code", "path", "message"}.
Json error_body(const Error& e);

struct HttpReply {
  int status = 200;
  std::string body;
};

class RewardService {
 public:
  /// Builds an LLM judge from cfg.judge when set; `transport` overrides the
  /// HTTP transport (tests use a stub).
  explicit RewardService(ServiceConfig cfg, std::shared_ptr<llm::Transport> transport = nullptr);
  ~RewardService();

  RewardService(const RewardService&) = delete;
  RewardService& operator=(const RewardService&) = delete;

  HttpReply handle_group(std::string_view body) const;
  HttpReply health() const;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port. Throws kIo when binding fails.
  int start();
  /// Blocks serving on the calling thread.
  void run();
  void stop();

  const ServiceConfig& config() const { return cfg_; }
  llm::LlmClient* judge() const { return judge_.get(); }

 private:
  struct Server;
  ServiceConfig cfg_;
  std::shared_ptr<llm::LlmClient> judge_;
  std::unique_ptr<Server> server_;
};

}  // namespace cabs_eval::service
