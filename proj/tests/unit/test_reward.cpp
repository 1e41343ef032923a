#include "doctest.h"

#include <cmath>

#include "cabs/grpo.hpp"
#include "cabs/tif_reward.hpp"
#include "support/oracles.hpp"

using namespace cabs_eval;

TEST_SUITE("tif_reward") {

TEST_CASE("unit rewards") {
  CHECK(unit_reward({"a", true, true, true}) == 1.0);
  CHECK(unit_reward({"a", true, false, true}) == 0.5);
  CHECK(unit_reward({"a", false, false, false}) == 0.0);
  CHECK(unit_reward({"a", true, true, false}) == 1.0);
}

TEST_CASE("mean unit reward") {
  CHECK(cabs_reward({{"a", true, true, false}, {"b", true, false, false}}) == 0.75);
  CHECK(cabs_reward({}) == 0.0);
  CHECK(cabs_reward(std::vector<UnitJudgment>(4, {"a", true, true, true})) == 1.0);
}

TEST_CASE("worked example term by term") {
  const auto b = tif_reward_from_unit_rewards({1.0, 0.5}, 1, 3);
  const auto t = cabs_test::oracle::tif_terms({1.0, 0.5}, 1, 3, 1.0, 1.0);
  CHECK(b.running_cost == doctest::Approx(0.96875).epsilon(1e-12));
  CHECK(b.control_effort == doctest::Approx(t.control).epsilon(1e-12));
  CHECK(b.terminal == 0.75);
  CHECK(b.bonus == 0.05);
  CHECK(std::abs(b.total - 2.657639) < 5e-7);
  CHECK(b.total == b.running_cost + b.control_effort + b.terminal + b.bonus);
  CHECK(b.terminal == b.r_cabs);
}

TEST_CASE("boundary cases") {
  RewardConfig cfg;
  cfg.gamma = 0.7;
  CHECK(tif_reward({}, 0, 0, cfg).total == 0.7);
  CHECK(tif_reward(std::vector<UnitJudgment>(3), 0, 0, cfg).total == doctest::Approx(0.7).epsilon(1e-12));
  const auto all_fp = tif_reward({}, 4, 4, cfg);
  CHECK(all_fp.running_cost == 0.0);
  CHECK(all_fp.terminal == 0.0);
  CHECK(all_fp.bonus == 0.05);
}

TEST_CASE("earlier hits earn more running reward") {
  std::vector<UnitJudgment> early(4), late(4);
  early[0] = {"x", true, true, false};
  late[3] = {"x", true, true, false};
  CHECK(tif_reward(early, 0, 1).running_cost > tif_reward(late, 0, 1).running_cost);
  CHECK(tif_reward(early, 0, 1).terminal == tif_reward(late, 0, 1).terminal);
}

TEST_CASE("from match result") {
  MatchResult m;
  m.judgments = {{"a", true, true, true}, {"b", true, false, false}};
  m.false_positives = {"c"};
  m.pred_count = 3;
  CHECK(tif_reward(m).total == tif_reward_from_unit_rewards({1.0, 0.5}, 1, 3).total);
}

TEST_CASE("invalid input") {
  CHECK_THROWS_AS(tif_reward({}, 2, 1), Error);
  RewardConfig bad;
  bad.alpha = -1;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = {};
  bad.epsilon = 0;
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("config json overlay") {
  RewardConfig base;
  const auto cfg = config_from_json(Json{{"alpha", 0.5}}, base);
  CHECK(cfg.alpha == 0.5);
  CHECK(cfg.gamma == 1.0);
  CHECK_THROWS_AS(config_from_json(Json{{"delta", 1}}, base), Error);
  CHECK(config_from_json(config_to_json(cfg), {}).alpha == 0.5);
  const auto j = breakdown_to_json(tif_reward_from_unit_rewards({1.0}, 0, 1));
  CHECK(j.contains("total"));
  CHECK(j.contains("running_cost"));
}

}

TEST_SUITE("grpo") {

TEST_CASE("advantages") {
  const std::vector<double> r = {1, 2, 3};
  const auto g = grpo::group_advantages(r, 0.0);
  CHECK(g.mu == 2.0);
  CHECK(g.sigma == doctest::Approx(std::sqrt(2.0 / 3)));
  CHECK(g.advantages[0] == doctest::Approx(-1.224745).epsilon(1e-6));
  CHECK(g.advantages[1] == 0.0);
  CHECK(g.advantages[2] == doctest::Approx(1.224745).epsilon(1e-6));

  for (double a : grpo::group_advantages(std::vector<double>{5, 5, 5, 5}).advantages) CHECK(a == 0.0);

  const auto two = grpo::group_advantages(std::vector<double>{0, 1});
  CHECK(two.advantages[0] == doctest::Approx(-0.999998).epsilon(1e-9));
  CHECK(two.advantages[1] == doctest::Approx(0.999998).epsilon(1e-9));

  CHECK_THROWS_AS(grpo::group_advantages(std::vector<double>{1}), Error);
  CHECK_THROWS_AS(grpo::group_advantages(std::vector<double>{1, 2}, -1.0), Error);
  CHECK_THROWS_AS(grpo::group_advantages(std::vector<double>{1, NAN}), Error);
}

TEST_CASE("surrogate") {
  CHECK(grpo::surrogate_term(1.0, 2.0) == 2.0);
  CHECK(grpo::surrogate_term(2.0, 1.0) == doctest::Approx(1.2));
  CHECK(grpo::surrogate_term(0.5, -1.0) == doctest::Approx(-0.8));
  CHECK(grpo::surrogate_term(2.0, -1.0) == -2.0);
  CHECK_THROWS_AS(grpo::surrogate_term(0.0, 1.0), Error);
  grpo::ObjectiveConfig bad;
  bad.clip_epsilon = 1.5;
  CHECK_THROWS_AS(grpo::validate(bad), Error);
}

TEST_CASE("kl estimate") {
  const std::vector<double> p = {-1.0, -2.0}, q = {-1.0, -2.0};
  CHECK(grpo::kl_estimate(p, q) == 0.0);
  const std::vector<double> a = {0.0}, b = {std::log(2.0)};
  CHECK(grpo::kl_estimate(a, b) == doctest::Approx(2 - std::log(2.0) - 1).epsilon(1e-12));
  CHECK(grpo::kl_estimate(b, a) >= 0.0);
  CHECK_THROWS_AS(grpo::kl_estimate(p, std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(grpo::kl_estimate(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("group objective") {
  const std::vector<double> ratios = {1.0, 1.0}, adv = {1.0, -1.0};
  CHECK(grpo::group_objective(ratios, adv, 0.5) == doctest::Approx(-0.04 * 0.5));
  const std::vector<double> up = {2.0, 2.0};
  CHECK(grpo::group_objective(up, adv, 0.0) == doctest::Approx((1.2 - 2.0) / 2));
  const auto j = grpo::scores_to_json(grpo::group_advantages(std::vector<double>{0, 1}));
  CHECK(j.contains("advantages"));
}

}
