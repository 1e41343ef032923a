#include "cabs/tif_reward.hpp"

#include <cmath>
#include <string>

namespace cabs_eval {

void validate(const RewardConfig& cfg) {
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must be >= 0", "alpha");
  }
  if (!(cfg.gamma >= 0.0) || !std::isfinite(cfg.gamma)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma must be >= 0", "gamma");
  }
  if (!std::isfinite(cfg.exploration_bonus)) {
    throw Error(ErrorCode::kInvalidArgument, "exploration_bonus must be finite", "exploration_bonus");
  }
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must be > 0", "epsilon");
  }
}

double unit_reward(const UnitJudgment& j) {
  const double hit = j.hit ? 1.0 : 0.0;
  const double d = hit;
  const double l = j.location_match ? 1.0 : 0.0;
  return hit * (l * d + 0.5 * std::abs(l - d));
}

double cabs_reward(const std::vector<UnitJudgment>& units) {
  if (units.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& u : units) sum += unit_reward(u);
  return sum / static_cast<double>(units.size());
}

RewardBreakdown tif_reward_from_unit_rewards(const std::vector<double>& unit_rewards, std::size_t fp,
                                             std::size_t m, const RewardConfig& cfg) {
  validate(cfg);
  if (fp > m) {
    throw Error(ErrorCode::kInvalidCounts,
                "false positives (" + std::to_string(fp) + ") exceed predicted units (" +
                    std::to_string(m) + ")");
  }
  RewardBreakdown b;
  b.unit_rewards = unit_rewards;
  const std::size_t k_units = unit_rewards.size();
  if (k_units > 0) {
    double prefix = 0.0;
    double integral = 0.0;
    double sum = 0.0;
    for (std::size_t k = 1; k <= k_units; ++k) {
      prefix += unit_rewards[k - 1];
      const double miss = 1.0 - prefix / static_cast<double>(k);
      integral += miss * miss;
      sum += unit_rewards[k - 1];
    }
    const double kd = static_cast<double>(k_units);
    b.running_cost = cfg.alpha - cfg.alpha / kd * integral;
    b.r_cabs = sum / kd;
  }
  const double ratio = static_cast<double>(fp) / (static_cast<double>(m) + cfg.epsilon);
  b.control_effort = cfg.gamma * (1.0 - ratio * ratio);
  b.terminal = b.r_cabs;
  b.bonus = m > 0 ? cfg.exploration_bonus : 0.0;
  b.total = b.running_cost + b.control_effort + b.terminal + b.bonus;
  return b;
}

RewardBreakdown tif_reward(const std::vector<UnitJudgment>& units, std::size_t fp, std::size_t m,
                           const RewardConfig& cfg) {
  std::vector<double> r;
  r.reserve(units.size());
  for (const auto& u : units) r.push_back(unit_reward(u));
  return tif_reward_from_unit_rewards(r, fp, m, cfg);
}

RewardBreakdown tif_reward(const MatchResult& match, const RewardConfig& cfg) {
  return tif_reward(match.judgments, match.fp_count(), match.pred_count, cfg);
}

Json breakdown_to_json(const RewardBreakdown& b) {
  Json j = Json::object();
  j["unit_rewards"] = b.unit_rewards;
  j["r_cabs"] = b.r_cabs;
  j["running_cost"] = b.running_cost;
  j["control_effort"] = b.control_effort;
  j["terminal"] = b.terminal;
  j["bonus"] = b.bonus;
  j["total"] = b.total;
  return j;
}

Json config_to_json(const RewardConfig& cfg) {
  Json j = Json::object();
  j["alpha"] = cfg.alpha;
  j["gamma"] = cfg.gamma;
  j["exploration_bonus"] = cfg.exploration_bonus;
  j["epsilon"] = cfg.epsilon;
  return j;
}

RewardConfig config_from_json(const Json& j, RewardConfig base, const std::string& path) {
  using namespace schema;
  require_object(j, path);
  reject_unknown_keys(j, {"alpha", "gamma", "exploration_bonus", "epsilon"}, path);
  if (j.contains("alpha")) base.alpha = require_number(j, "alpha", path);
  if (j.contains("gamma")) base.gamma = require_number(j, "gamma", path);
  if (j.contains("exploration_bonus")) base.exploration_bonus = require_number(j, "exploration_bonus", path);
  if (j.contains("epsilon")) base.epsilon = require_number(j, "epsilon", path);
  try {
    validate(base);
  } catch (const Error& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what(), join_path(path, e.path()));
  }
  return base;
}

}  // namespace cabs_eval
