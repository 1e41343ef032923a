#pragma once

// Group-relative advantage normalization and the scalar pieces of the
// clipped surrogate objective with KL penalty. No autodiff; a trainer
// consumes these values.

#include <span>
#include <vector>

#include "cabs/core.hpp"

namespace cabs_eval::grpo {

inline constexpr double kDefaultAdvantageEpsilon = 1e-6;

struct GroupScores {
  std::vector<double> rewards;
  double mu = 0.0;
  double sigma = 0.0;  ///< population standard deviation
  std::vector<double> advantages;
  double epsilon = kDefaultAdvantageEpsilon;
};

/// A_i = (r_i - mu) / (sigma + epsilon). Throws kGroupTooSmall for G < 2,
/// kInvalidArgument for negative epsilon or non-finite rewards.
GroupScores group_advantages(std::span<const double> rewards,
                             double epsilon = kDefaultAdvantageEpsilon);

struct ObjectiveConfig {
  double clip_epsilon = 0.2;
  double beta = 0.04;
};

/// Throws kInvalidArgument unless clip_epsilon is in (0, 1) and beta >= 0.
void validate(const ObjectiveConfig& cfg);

/// min(ratio * A, clip(ratio, 1 - c, 1 + c) * A). Throws kNonPositiveRatio.
double surrogate_term(double ratio, double advantage, const ObjectiveConfig& cfg = {});

/// Mean over tokens of exp(d) - d - 1 with d = logp_ref - logp_policy;
/// non-negative for every input. Throws kLengthMismatch (also for empty).
double kl_estimate(std::span<const double> logp_policy, std::span<const double> logp_ref);

/// Group objective: mean surrogate term minus beta * KL.
double group_objective(std::span<const double> ratios, std::span<const double> advantages, double kl,
                       const ObjectiveConfig& cfg = {});

Json scores_to_json(const GroupScores& g);

}  // namespace cabs_eval::grpo
