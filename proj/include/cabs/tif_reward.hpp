#pragma once

// Trajectory-integral reward. Ground-truth units, in document order, form
// the reference trajectory; each unit earns a hit reward in {0, 0.5, 1},
// and the total combines a squared prefix-miss integral (running cost), a
// squared false-positive ratio penalty (control effort), the mean unit
// reward (terminal) and a fixed bonus for predicting anything at all.

#include <cstddef>
#include <vector>

#include "cabs/core.hpp"
#include "cabs/matching.hpp"

namespace cabs_eval {

struct RewardConfig {
  double alpha = 1.0;               ///< running-cost weight
  double gamma = 1.0;               ///< control-effort weight
  double exploration_bonus = 0.05;  ///< paid when M > 0
  double epsilon = 1e-8;            ///< FP / (M + epsilon)
};

/// Throws kInvalidArgument on negative weights or non-positive epsilon.
void validate(const RewardConfig& cfg);

struct RewardBreakdown {
  std::vector<double> unit_rewards;
  double r_cabs = 0.0;
  double running_cost = 0.0;
  double control_effort = 0.0;
  double terminal = 0.0;
  double bonus = 0.0;
  double total = 0.0;

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

/// hit * (l*d + |l - d| / 2) with d := hit and l := location_match, so a
/// hit scores 1 with a matching location and 0.5 without.
double unit_reward(const UnitJudgment& j);

/// Mean unit reward; 0 for an empty trajectory.
double cabs_reward(const std::vector<UnitJudgment>& units);

/// Full reward from judgments in trajectory order, false-positive count
/// and number of predicted units. K = 0 zeroes the running cost and
/// terminal terms. Throws kInvalidCounts when fp > m.
RewardBreakdown tif_reward(const std::vector<UnitJudgment>& units, std::size_t fp, std::size_t m,
                           const RewardConfig& cfg = {});

/// Same computation from precomputed unit rewards r_i.
RewardBreakdown tif_reward_from_unit_rewards(const std::vector<double>& unit_rewards, std::size_t fp,
                                             std::size_t m, const RewardConfig& cfg = {});

RewardBreakdown tif_reward(const MatchResult& match, const RewardConfig& cfg = {});

Json breakdown_to_json(const RewardBreakdown& b);
Json config_to_json(const RewardConfig& cfg);
/// Applies the keys present in `j` on top of `base`; unknown keys rejected.
RewardConfig config_from_json(const Json& j, RewardConfig base, const std::string& path = "");

}  // namespace cabs_eval
