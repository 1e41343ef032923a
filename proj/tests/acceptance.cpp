// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "cabs/core.hpp"
#include "cabs/divergence.hpp"
#include "cabs/grpo.hpp"
#include "cabs/lexicon.hpp"
#include "cabs/matching.hpp"
#include "cabs/mcq.hpp"
#include "cabs/metrics.hpp"
#include "cabs/reward_service.hpp"
#include "cabs/text.hpp"
#include "cabs/tif_reward.hpp"
#include "httplib.h"
#include "support/oracles.hpp"
#include "support/stub_transport.hpp"

using namespace cabs_eval;
namespace oracle = cabs_test::oracle;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double max_score_gap(const MetricReport& r, const oracle::Scores& s) {
  const double got[] = {r.precision,          r.recall,     r.f1,
                        r.location_accuracy,  r.attribute_accuracy,
                        r.fully_consistent_accuracy, r.or_rate, r.fmor_rate};
  const double want[] = {s.p, s.r, s.f1, s.loc, s.attr, s.full, s.or_rate, s.fmor};
  double gap = 0;
  for (int i = 0; i < 8; ++i) gap = std::max(gap, std::abs(got[i] - want[i]));
  return gap;
}

Outcome metric_oracle() {
  const auto t0 = Clock::now();
  SeededRng rng(1001);
  double worst = 0;
  bool counts_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = rng.index(11);
    std::vector<Organ> organs;
    const std::size_t n_organs = 1 + rng.index(5);
    std::vector<Organ> pool(kAllOrgans.begin(), kAllOrgans.end());
    rng.shuffle(pool);
    organs.assign(pool.begin(), pool.begin() + static_cast<long>(n_organs));

    std::vector<AbnormalityUnit> units;
    std::vector<oracle::Judged> judged;
    MatchResult m;
    for (std::size_t i = 0; i < k; ++i) {
      AbnormalityUnit u;
      u.name = "finding " + std::to_string(i);
      u.evidence = "finding " + std::to_string(i) + " is present";
      u.organ = organs[rng.index(organs.size())];
      units.push_back(u);
      oracle::Judged o;
      o.hit = rng.unit() < 0.6;
      o.loc = o.hit && rng.unit() < 0.5;
      o.attr = o.hit && rng.unit() < 0.5;
      o.organ = static_cast<int>(u.organ);
      judged.push_back(o);
      m.judgments.push_back({u.name, o.hit, o.loc, o.attr});
    }
    const std::size_t fp = rng.index(6);
    for (std::size_t i = 0; i < fp; ++i) m.false_positives.push_back("extra " + std::to_string(i));
    m.pred_count = m.hit_count() + fp;

    const ReportDecomposition gt(units);
    const MetricReport r = evaluate(m, gt);
    worst = std::max(worst, max_score_gap(r, oracle::count_scores(judged, fp)));
    std::size_t hits = 0;
    for (const auto& j : judged) hits += j.hit ? 1 : 0;
    counts_ok = counts_ok && r.hit_count == hits && r.fp_count == fp && r.gt_count == k;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && counts_ok && secs < 5.0,
          "max |lib - oracle| = " + fmt("%.3g", worst) + ", counts " + (counts_ok ? "equal" : "differ") +
              ", " + fmt("%.3f s", secs)};
}

Outcome self_evaluation() {
  const auto corpus = divergence::synthesize_corpus(100, 2002);
  double worst = 0;
  for (const auto& gt : corpus) {
    const MetricReport r = evaluate(lexical_match(gt.units(), gt.units()), gt);
    for (const auto& name : metric_score_names()) {
      worst = std::max(worst, std::abs(1.0 - metric_score(r, name)));
    }
  }
  return {worst <= 1e-7, "max |1 - score| = " + fmt("%.3g", worst)};
}

Outcome tif_worked_example() {
  const oracle::TifTerms t = oracle::tif_terms({1.0, 0.5}, 1, 3, 1.0, 1.0);
  std::vector<UnitJudgment> units = {{"a", true, true, false}, {"b", true, false, false}};
  const RewardBreakdown b = tif_reward(units, 1, 3);
  const RewardBreakdown c = tif_reward_from_unit_rewards({1.0, 0.5}, 1, 3);
  const double lib_gap = std::max(std::abs(b.total - t.total), std::abs(c.total - t.total));
  const double ref_gap = std::abs(t.total - 2.657639);
  return {lib_gap <= 1e-9 && ref_gap <= 5e-7,
          "total = " + fmt("%.9f", b.total) + ", oracle = " + fmt("%.9f", t.total) +
              ", |oracle - 2.657639| = " + fmt("%.2g", ref_gap)};
}

Outcome boundary_cases() {
  SeededRng rng(3003);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    RewardConfig cfg;
    cfg.alpha = 0.1 + 2 * rng.unit();
    cfg.gamma = 0.1 + 2 * rng.unit();
    const std::size_t k = 1 + rng.index(10);
    const std::size_t m = 1 + rng.index(10);

    worst = std::max(worst, std::abs(tif_reward({}, 0, 0, cfg).total - cfg.gamma));

    std::vector<UnitJudgment> missed(k);
    worst = std::max(worst, std::abs(tif_reward(missed, 0, 0, cfg).total - cfg.gamma));

    const double md = static_cast<double>(m);
    const double ratio = md / (md + 1e-8);
    const double want = cfg.gamma * (1 - ratio * ratio) + 0.05;
    worst = std::max(worst, std::abs(tif_reward({}, m, m, cfg).total - want));
  }
  return {worst <= 1e-12, "max deviation = " + fmt("%.3g", worst)};
}

Outcome prefix_sensitivity() {
  SeededRng rng(4004);
  int strict = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.index(7);
    RewardConfig cfg;
    cfg.alpha = 0.05 + 2 * rng.unit();
    const bool loc = rng.unit() < 0.5;
    std::vector<UnitJudgment> early(k), late(k);
    early.front() = {"x", true, loc, false};
    late.back() = {"x", true, loc, false};
    const std::size_t m = 1 + rng.index(4);
    const std::size_t fp = rng.index(m);
    if (tif_reward(early, fp, m, cfg).running_cost > tif_reward(late, fp, m, cfg).running_cost) ++strict;
  }
  return {strict == 200, std::to_string(strict) + "/200 strictly greater"};
}

Outcome advantage_normalization() {
  SeededRng rng(5005);
  double mean_dev = 0, std_dev = 0, shift_dev = 0, const_dev = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t g = 2 + rng.index(15);
    std::vector<double> r(g);
    for (auto& x : r) x = -1 + 5 * rng.unit();

    const auto with_eps = grpo::group_advantages(r);
    mean_dev = std::max(mean_dev, std::abs(oracle::mean(with_eps.advantages)));

    const auto exact = grpo::group_advantages(r, 0.0);
    std_dev = std::max(std_dev, std::abs(oracle::pop_std(exact.advantages) - 1.0));

    const double a = 0.25 + 4 * rng.unit();
    const double b = -3 + 6 * rng.unit();
    std::vector<double> moved(g);
    for (std::size_t i = 0; i < g; ++i) moved[i] = a * r[i] + b;
    const auto shifted = grpo::group_advantages(moved, 0.0);
    for (std::size_t i = 0; i < g; ++i) {
      shift_dev = std::max(shift_dev, std::abs(shifted.advantages[i] - exact.advantages[i]));
    }

    const std::vector<double> flat(g, r[0]);
    for (double eps : {0.0, grpo::kDefaultAdvantageEpsilon}) {
      for (double x : grpo::group_advantages(flat, eps).advantages) const_dev = std::max(const_dev, std::abs(x));
    }
  }
  const bool pass = mean_dev <= 1e-9 && std_dev <= 1e-9 && const_dev == 0.0 && shift_dev <= 1e-12;
  return {pass, "|mean| " + fmt("%.2g", mean_dev) + ", |std-1| " + fmt("%.2g", std_dev) + ", shift/scale " +
                    fmt("%.2g", shift_dev) + ", constant " + fmt("%.2g", const_dev)};
}

Outcome surrogate_and_kl() {
  const grpo::ObjectiveConfig cfg;
  const double c = cfg.clip_epsilon;
  double worst = 0;
  for (double ratio : {0.5, 1.0, 1.5}) {
    for (double adv : {-1.3, 0.0, 2.1}) {
      double want = 0;
      if (adv > 0) want = std::min(ratio, 1 + c) * adv;
      if (adv < 0) want = std::max(ratio, 1 - c) * adv;
      worst = std::max(worst, std::abs(grpo::surrogate_term(ratio, adv, cfg) - want));
    }
  }
  SeededRng rng(6006);
  double min_kl = 1e300, max_same = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.index(16);
    std::vector<double> p(n), q(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = -12 * rng.unit();
      q[i] = -12 * rng.unit();
    }
    min_kl = std::min(min_kl, grpo::kl_estimate(p, q));
    max_same = std::max(max_same, std::abs(grpo::kl_estimate(p, p)));
  }
  return {worst <= 1e-12 && min_kl >= 0.0 && max_same == 0.0,
          "grid max error " + fmt("%.2g", worst) + ", min KL " + fmt("%.3g", min_kl) + ", identical " +
              fmt("%.2g", max_same)};
}

Outcome mechanistic_divergence() {
  const auto t0 = Clock::now();
  const auto corpus = divergence::synthesize_corpus(200, 7007);
  divergence::PerturbOptions opts;
  opts.allowed = divergence::kEntityEdits;
  std::vector<divergence::PoolScores> scored;
  bool six = true;
  double oracle_gap = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto pool = divergence::build_pool("case" + std::to_string(i), corpus[i], derive_seed(7007, i), opts);
    six = six && pool.variants.size() == 6;
    scored.push_back(divergence::score_pool(pool));
    for (const auto& [metric, scores] : scored.back().metrics) {
      const double lib = divergence::concordance(pool.text_ranks, scores).phi;
      oracle_gap = std::max(oracle_gap, std::abs(lib - oracle::phi(pool.text_ranks, scores)));
    }
  }
  const auto report = divergence::analyze_pools(scored);
  const double secs = seconds_since(t0);
  const double f1 = report.mean_phi.at("cabs_f1");
  const double bleu = report.mean_phi.at("bleu");
  const double rouge = report.mean_phi.at("rouge_l");
  const double gap = f1 - std::max(bleu, rouge);
  const bool pass = six && oracle_gap <= 1e-12 && std::abs(f1 - 1.0) <= 1e-12 && bleu < f1 && rouge < f1 &&
                    gap >= 0.05 && secs < 30.0;
  return {pass, "phi cabs_f1 " + fmt("%.4f", f1) + ", bleu " + fmt("%.4f", bleu) + ", rouge_l " +
                    fmt("%.4f", rouge) + ", gap " + fmt("%.4f", gap) + ", " + fmt("%.2f s", secs)};
}

// Ten models, two independent latent qualities. Suite A reads the first
// through monotone transforms with small noise, suite B the second.
struct BlockStats {
  double within = 0;
  double cross = 0;
};

BlockStats block_matrix(std::uint64_t seed) {
  SeededRng rng(seed);
  surface::ScoreTable table;
  const std::vector<std::function<double(double)>> transforms = {
      [](double x) { return x; }, [](double x) { return x * x * x; }, [](double x) { return std::exp(x); },
      [](double x) { return 2 * x + 1; }};
  for (int model = 0; model < 10; ++model) {
    const double u = rng.unit();
    const double v = rng.unit();
    const std::string id = "model" + std::to_string(model);
    for (std::size_t t = 0; t < transforms.size(); ++t) {
      table.add(id, "suite_a_" + std::to_string(t), transforms[t](u + 0.05 * (rng.unit() - 0.5)));
      table.add(id, "suite_b_" + std::to_string(t), transforms[t](v + 0.05 * (rng.unit() - 0.5)));
    }
  }
  const auto m = divergence::correlation_matrix(table);
  double within = 0, cross = 0;
  int nw = 0, nc = 0;
  for (std::size_t i = 0; i < m.metrics.size(); ++i) {
    for (std::size_t j = i + 1; j < m.metrics.size(); ++j) {
      const bool same = m.metrics[i].substr(0, 7) == m.metrics[j].substr(0, 7);
      if (same) {
        within += m.rho[i][j];
        ++nw;
      } else {
        cross += std::abs(m.rho[i][j]);
        ++nc;
      }
    }
  }
  return {within / nw, cross / nc};
}

Outcome block_structure() {
  const BlockStats one = block_matrix(8008);
  double within = 0, cross = 0;
  const int replicates = 100;
  for (int r = 0; r < replicates; ++r) {
    const BlockStats s = block_matrix(derive_seed(8008, static_cast<std::uint64_t>(r)));
    within += s.within;
    cross += s.cross;
  }
  within /= replicates;
  cross /= replicates;
  return {within >= 0.8 && cross <= 0.4,
          "over " + std::to_string(replicates) + " matrices: within rho " + fmt("%.3f", within) +
              ", cross |rho| " + fmt("%.3f", cross) + " (seed matrix: " + fmt("%.3f", one.within) + " / " +
              fmt("%.3f", one.cross) + ")"};
}

double chi_square_p(const std::vector<double>& counts) {
  double total = 0;
  for (double c : counts) total += c;
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0;
  for (double c : counts) stat += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

Outcome mcq_construction() {
  const auto& lex = Lexicon::builtin();
  std::vector<std::string> names;
  for (const auto& e : lex.entries()) names.push_back(e.name);
  SeededRng rng(9009);
  std::vector<double> four(4, 0.0), yes(2, 0.0);
  int built = 0, invalid = 0;
  std::string first_error;
  while (built < 1000) {
    const auto d = divergence::synthesize_decomposition(rng, 1, 1);
    const AbnormalityUnit& unit = d[0];
    const std::uint64_t seed = rng.next();
    try {
      const std::string negative = mcq::sample_negative_name(d.units(), names, derive_seed(seed, 1));
      const mcq::McqSet set =
          mcq::build_mcq(unit, negative, lex.all_locations(), lex.attributes(), derive_seed(seed, 2));
      mcq::validate_set(set);
      bool counts = set.items.size() == 2 + (unit.location.empty() ? 0 : 1) + (unit.attributes.empty() ? 0 : 1);
      for (const auto& item : set.items) {
        const std::size_t pos = static_cast<std::size_t>(item.answer[0] - 'A');
        if (item.type == mcq::ItemType::kLocation || item.type == mcq::ItemType::kAttribute) {
          counts = counts && item.options.size() == 4;
          const std::string want = item.type == mcq::ItemType::kLocation ? unit.location : unit.attributes;
          counts = counts && item.answer_text() == want;
          four[pos] += 1;
        } else {
          counts = counts && item.options.size() == 2;
          const std::string key = item.type == mcq::ItemType::kExistencePositive ? "Yes" : "No";
          counts = counts && item.answer_text() == key;
          if (item.type == mcq::ItemType::kExistencePositive) yes[pos] += 1;
        }
        const std::string q = to_lower_ascii(item.question);
        for (const char* w : {"report", "findings", "impression"}) {
          counts = counts && q.find(w) == std::string::npos;
        }
      }
      if (!counts) ++invalid;
    } catch (const Error& e) {
      ++invalid;
      if (first_error.empty()) first_error = e.what();
    }
    ++built;
  }
  const double p4 = chi_square_p(four);
  const double p2 = chi_square_p(yes);
  std::string detail = std::to_string(invalid) + " invalid of 1000, 4-option p = " + fmt("%.4f", p4) +
                       ", yes/no p = " + fmt("%.4f", p2);
  if (!first_error.empty()) detail += ", first error: " + first_error;
  return {invalid == 0 && p4 > 0.001 && p2 > 0.001, detail};
}

std::string random_text(SeededRng& rng, const std::vector<std::string>& words, std::size_t max_words) {
  const std::size_t n = 1 + rng.index(max_words);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += words[rng.index(words.size())];
  }
  return s;
}

Outcome schema_round_trips() {
  SeededRng rng(10010);
  const std::vector<std::string> name_words = {"nodule", "mass", "cyst", "opacity", "\"quoted\"", "café",
                                               "a\\b", "tab\there", "µm", "line\nbreak"};
  const std::vector<std::string> place_words = {"upper", "lobe", "left", "apex", "segment", "hilum", "<tag>"};
  const std::vector<std::string> attr_words = {"patchy", "small", "calcified", "3.5 cm", "ill-defined"};
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<AbnormalityUnit> units;
    const std::size_t k = rng.index(6);
    for (std::size_t u = 0; u < k; ++u) {
      AbnormalityUnit a;
      a.name = random_text(rng, name_words, 3);
      a.evidence = random_text(rng, name_words, 4) + " " + random_text(rng, place_words, 3);
      if (rng.unit() < 0.7) a.location = random_text(rng, place_words, 3);
      if (rng.unit() < 0.7) a.attributes = random_text(rng, attr_words, 2);
      a.certainty = rng.unit() < 0.5 ? Certainty::kDefinite : Certainty::kPossible;
      a.organ = kAllOrgans[rng.index(kAllOrgans.size())];
      units.push_back(a);
    }
    const ReportDecomposition d(units);
    const std::string text = serialize_decomposition(d);
    const ReportDecomposition back = parse_decomposition(text);
    if (!(back == d) || serialize_decomposition(back) != text) ++failures;
  }
  for (int i = 0; i < 1000; ++i) {
    MatchResult m;
    const std::size_t k = rng.index(8);
    for (std::size_t u = 0; u < k; ++u) {
      UnitJudgment j;
      j.name = random_text(rng, name_words, 3);
      j.hit = rng.unit() < 0.6;
      j.location_match = j.hit && rng.unit() < 0.5;
      j.attribute_match = j.hit && rng.unit() < 0.5;
      m.judgments.push_back(j);
    }
    const std::size_t fp = rng.index(4);
    for (std::size_t f = 0; f < fp; ++f) m.false_positives.push_back(random_text(rng, name_words, 2));
    m.pred_count = m.hit_count() + fp;
    const std::string text = serialize_match(m);
    const DecodedMatch back = parse_match(text);
    if (!(back.result == m) || back.repaired || serialize_match(back.result) != text) ++failures;
  }
  const auto& lex = Lexicon::builtin();
  for (int i = 0; i < 1000; ++i) {
    const auto d = divergence::synthesize_decomposition(rng, 1, 1);
    const std::string negative = lex.entries()[rng.index(lex.entries().size())].name;
    if (names_match(negative, d[0].name)) {
      --i;
      continue;
    }
    const mcq::McqSet set = mcq::build_mcq(d[0], negative, lex.all_locations(), lex.attributes(), rng.next());
    const std::string text = mcq::set_to_json(set).dump();
    const mcq::McqSet back = mcq::set_from_json(Json::parse(text));
    if (!(back == set) || mcq::set_to_json(back).dump() != text) ++failures;
  }
  return {failures == 0, std::to_string(failures) + " mismatches over 3000 round trips"};
}

Outcome service_determinism() {
  const ReportDecomposition gt = parse_decomposition(R"({"abnormalities":[
    {"name":"pleural effusion","evidence":"Small right pleural effusion.","location":"right pleural space","attributes":"small","certainty":"definite","organ":"lung"},
    {"name":"pulmonary nodule","evidence":"A 6 mm nodule in the left upper lobe.","location":"left upper lobe","attributes":"6 mm","certainty":"definite","organ":"lung"}],
    "report_has_abnormality":true})");

  Json body;
  body["request_id"] = "determinism";
  body["gt_units"] = decomposition_to_json(gt);
  body["rollouts"] = Json::array({"Small right pleural effusion. 6 mm nodule in the left upper lobe.",
                                  "Left pleural effusion is seen.", "", "Cardiomegaly."});

  const std::string judge_reply =
      R"({"abnormalities":[{"name":"pleural effusion","hit":true,"location_match":true,"attribute_match":true},)"
      R"({"name":"pulmonary nodule","hit":false,"location_match":false,"attribute_match":false}],"false_positive":[]})";
  auto stub = std::make_shared<cabs_test::StubTransport>(
      [&](const std::string&, int) { return cabs_test::ok(judge_reply); }, std::chrono::milliseconds(20));

  service::ServiceConfig cfg;
  cfg.port = 0;
  cfg.judge = cabs_test::stub_model();
  service::RewardService svc(cfg, stub);
  const int port = svc.start();

  auto fire = [&](const std::string& payload) {
    std::vector<std::string> bodies(16);
    std::vector<int> status(16, 0);
    std::vector<std::thread> threads;
    for (int t = 0; t < 16; ++t) {
      threads.emplace_back([&, t] {
        httplib::Client client("127.0.0.1", port);
        client.set_read_timeout(30, 0);
        auto res = client.Post("/v1/reward/group", payload, "application/json");
        if (res) {
          status[static_cast<std::size_t>(t)] = res->status;
          bodies[static_cast<std::size_t>(t)] = res->body;
        } else {
          bodies[static_cast<std::size_t>(t)] = httplib::to_string(res.error());
        }
      });
    }
    for (auto& th : threads) th.join();
    bool same = true;
    for (int t = 0; t < 16; ++t) {
      if (status[static_cast<std::size_t>(t)] != 200 || bodies[static_cast<std::size_t>(t)] != bodies[0]) {
        std::cerr << "request " << t << " status " << status[static_cast<std::size_t>(t)] << " body "
                  << bodies[static_cast<std::size_t>(t)].substr(0, 200) << "\n";
        same = false;
      }
    }
    return std::make_pair(same, bodies[0]);
  };

  const auto lexical = fire(body.dump());
  body["matcher"] = "llm";
  const auto judged = fire(body.dump());
  svc.stop();

  const std::size_t per_prompt = stub->max_calls_per_prompt();
  const bool pass = lexical.first && judged.first && per_prompt <= 1 && stub->total() > 0;
  return {pass, std::string("lexical bodies ") + (lexical.first ? "identical" : "differ") + ", llm bodies " +
                    (judged.first ? "identical" : "differ") + ", max judge calls per prompt " +
                    std::to_string(per_prompt) + " (" + std::to_string(stub->total()) + " total)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"metric_oracle_equivalence", metric_oracle},
      {"self_evaluation_identity", self_evaluation},
      {"tif_worked_example", tif_worked_example},
      {"tif_boundary_cases", boundary_cases},
      {"prefix_sensitivity", prefix_sensitivity},
      {"advantage_normalization", advantage_normalization},
      {"surrogate_and_kl", surrogate_and_kl},
      {"mechanistic_divergence", mechanistic_divergence},
      {"block_structure", block_structure},
      {"mcq_construction", mcq_construction},
      {"schema_round_trips", schema_round_trips},
      {"service_determinism", service_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  }
  std::cout << (checks.size() - static_cast<std::size_t>(failed)) << "/" << checks.size() << " passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
