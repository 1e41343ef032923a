#include "cabs/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cabs_eval::grpo {

GroupScores group_advantages(std::span<const double> rewards, double epsilon) {
  if (rewards.size() < 2) {
    throw Error(ErrorCode::kGroupTooSmall,
                "group needs at least 2 rollouts, got " + std::to_string(rewards.size()));
  }
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be >= 0");
  for (double r : rewards) {
    if (!std::isfinite(r)) throw Error(ErrorCode::kInvalidArgument, "rewards must be finite");
  }
  GroupScores g;
  g.rewards.assign(rewards.begin(), rewards.end());
  g.epsilon = epsilon;
  const double n = static_cast<double>(rewards.size());
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) {
    // Exact zero spread; the floating mean may differ from r by an ulp.
    g.mu = rewards[0];
    g.advantages.assign(rewards.size(), 0.0);
    return g;
  }
  double sum = 0.0;
  for (double r : rewards) sum += r;
  g.mu = sum / n;
  double sq = 0.0;
  for (double r : rewards) sq += (r - g.mu) * (r - g.mu);
  g.sigma = std::sqrt(sq / n);
  g.advantages.reserve(rewards.size());
  const double denom = g.sigma + epsilon;
  for (double r : rewards) {
    g.advantages.push_back((r - g.mu) / denom);
  }
  return g;
}

void validate(const ObjectiveConfig& cfg) {
  if (!(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "clip_epsilon must lie in (0, 1)", "clip_epsilon");
  }
  if (!(cfg.beta >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "beta must be >= 0", "beta");
}

double surrogate_term(double ratio, double advantage, const ObjectiveConfig& cfg) {
  validate(cfg);
  if (!(ratio > 0.0)) throw Error(ErrorCode::kNonPositiveRatio, "importance ratio must be > 0");
  const double clipped = std::clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

double kl_estimate(std::span<const double> logp_policy, std::span<const double> logp_ref) {
  if (logp_policy.size() != logp_ref.size() || logp_policy.empty()) {
    throw Error(ErrorCode::kLengthMismatch, "log-prob sequences must have equal non-zero length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < logp_policy.size(); ++i) {
    const double d = logp_ref[i] - logp_policy[i];
    // expm1(d) - d keeps precision near d = 0; clamp guards the last ulp.
    sum += std::max(0.0, std::expm1(d) - d);
  }
  return sum / static_cast<double>(logp_policy.size());
}

double group_objective(std::span<const double> ratios, std::span<const double> advantages, double kl,
                       const ObjectiveConfig& cfg) {
  if (ratios.size() != advantages.size() || ratios.empty()) {
    throw Error(ErrorCode::kLengthMismatch, "ratios and advantages must have equal non-zero length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) sum += surrogate_term(ratios[i], advantages[i], cfg);
  return sum / static_cast<double>(ratios.size()) - cfg.beta * kl;
}

Json scores_to_json(const GroupScores& g) {
  Json j = Json::object();
  j["rewards"] = g.rewards;
  j["mu"] = g.mu;
  j["sigma"] = g.sigma;
  j["advantages"] = g.advantages;
  j["epsilon"] = g.epsilon;
  return j;
}

}  // namespace cabs_eval::grpo
