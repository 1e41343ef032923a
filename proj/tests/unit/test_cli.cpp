#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cabs/divergence.hpp"
#include "cli.hpp"
#include "support/fixtures.hpp"
#include "support/stub_transport.hpp"

using namespace cabs_eval;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args, const std::string& input = "",
               std::shared_ptr<llm::Transport> transport = nullptr) {
  std::istringstream in(input);
  std::ostringstream out, err;
  cli::Io io{&in, &out, &err, std::move(transport)};
  Result r;
  r.code = cli::run(args, io);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<Json> json_lines(const std::string& text) {
  std::vector<Json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(Json::parse(line));
  }
  return out;
}

std::string self_match_corpus() {
  std::string text;
  for (int i = 0; i < 3; ++i) {
    Json c;
    c["case_id"] = "c" + std::to_string(i);
    c["gt_units"] = Json::parse(cabs_test::kThreeUnitDoc);
    c["pred_units"] = Json::parse(cabs_test::kThreeUnitDoc);
    text += c.dump() + "\n";
  }
  return text;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto p = std::filesystem::temp_directory_path() / ("cabs_cli_" + name);
  std::ofstream(p) << content;
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 2") {
  auto r = run_cli({"eval", "--averaging", "median"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(Json::parse(r.err)["error"] == "usage");
  CHECK(run_cli({"perturb"}).code == cli::kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
}

TEST_CASE("eval self-match corpus") {
  auto r = run_cli({"eval"}, self_match_corpus());
  REQUIRE(r.code == cli::kExitOk);
  const Json j = Json::parse(r.out);
  CHECK(j["cases"].size() == 3);
  CHECK(j["aggregate"]["f1"].get<double>() == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(std::abs(j["aggregate"]["f1"].get<double>() - 1.0) <= 1e-7);

  auto csv = run_cli({"eval", "--format", "csv", "--averaging", "micro"}, self_match_corpus());
  REQUIRE(csv.code == cli::kExitOk);
  CHECK(csv.out.find("__aggregate_micro,") != std::string::npos);
  CHECK(std::count(csv.out.begin(), csv.out.end(), '\n') == 5);
}

TEST_CASE("eval from report text") {
  Json c;
  c["case_id"] = "t1";
  c["gt_report"] = cabs_test::kThreeUnitReport;
  c["pred_report"] = "Small left pleural effusion. Mild cardiomegaly.";
  auto r = run_cli({"eval", "--jobs", "2"}, c.dump() + "\n");
  REQUIRE(r.code == cli::kExitOk);
  const Json s = Json::parse(r.out)["cases"][0]["scores"];
  CHECK(s["hit_count"] == 1);
  CHECK(s["fp_count"] == 1);
  CHECK(s["gt_count"] == 3);
}

TEST_CASE("input errors report the line") {
  const std::string text = self_match_corpus() + "{\"case_id\": 5}\n";
  auto r = run_cli({"eval"}, text);
  CHECK(r.code == cli::kExitInput);
  const Json e = Json::parse(r.err);
  CHECK(e["line"] == 4);
  CHECK(e["error"] == "schema_violation");
  CHECK(e["path"] == "case_id");

  CHECK(run_cli({"eval"}, "").code == cli::kExitInput);
  CHECK(run_cli({"eval", "--input", "/nonexistent/file.jsonl"}).code == cli::kExitInput);
}

TEST_CASE("extract fills decompositions") {
  Json c;
  c["case_id"] = "e1";
  c["gt_report"] = cabs_test::kThreeUnitReport;
  c["pred_report"] = "";
  auto r = run_cli({"extract"}, c.dump() + "\n");
  REQUIRE(r.code == cli::kExitOk);
  const Json out = Json::parse(r.out);
  CHECK(out["gt_units"]["abnormalities"].size() == 3);
  CHECK(out["pred_units"]["report_has_abnormality"] == false);
}

TEST_CASE("reward on the worked fixture") {
  const std::string gt = R"({"abnormalities":[
    {"name":"nodule","evidence":"nodule in the right upper lobe","location":"right upper lobe","attributes":"","certainty":"definite","organ":"lung"},
    {"name":"pleural effusion","evidence":"left pleural effusion","location":"left pleural space","attributes":"","certainty":"definite","organ":"lung"}],
    "report_has_abnormality":true})";
  const std::string pred = R"({"abnormalities":[
    {"name":"nodule","evidence":"nodule","location":"right upper lobe","attributes":"","certainty":"definite","organ":"lung"},
    {"name":"pleural effusion","evidence":"effusion","location":"right pleural space","attributes":"","certainty":"definite","organ":"lung"},
    {"name":"cardiomegaly","evidence":"cardiomegaly","location":"","attributes":"","certainty":"definite","organ":"heart"}],
    "report_has_abnormality":true})";
  Json req;
  req["request_id"] = "w";
  req["gt_units"] = Json::parse(gt);
  req["rollouts"] = Json::array({Json::parse(pred), ""});
  req["ratios"] = Json::array({1.1, 0.9});
  req["kl"] = 0.01;
  auto r = run_cli({"reward", "--alpha", "1", "--gamma", "1"}, req.dump() + "\n");
  REQUIRE(r.code == cli::kExitOk);
  const Json out = Json::parse(r.out);
  CHECK(std::abs(out["rollouts"][0]["reward"]["total"].get<double>() - 2.657639) < 5e-7);
  CHECK(out["rollouts"][1]["reward"]["total"].get<double>() == 1.0);
  CHECK(out.contains("objective"));
  CHECK(out["objective"]["beta"] == 0.04);

  req["ratios"] = Json::array({1.0});
  CHECK(run_cli({"reward"}, req.dump() + "\n").code == cli::kExitInput);
  req.erase("ratios");
  req["rollouts"] = Json::array({""});
  auto small = run_cli({"reward"}, req.dump() + "\n");
  CHECK(small.code == cli::kExitInput);
  CHECK(Json::parse(small.err)["error"] == "group_too_small");
}

TEST_CASE("perturb then analyze") {
  std::string corpus;
  const auto gts = divergence::synthesize_corpus(30, 77);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    Json c;
    c["case_id"] = "s" + std::to_string(i);
    c["gt_units"] = decomposition_to_json(gts[i]);
    corpus += c.dump() + "\n";
  }
  auto pools = run_cli({"perturb", "--seed", "5", "--edits", "delete,substitute,inject"}, corpus);
  REQUIRE(pools.code == cli::kExitOk);
  CHECK(json_lines(pools.out).size() == 30);
  CHECK(run_cli({"perturb", "--seed", "5", "--edits", "delete,substitute,inject", "--jobs", "4"}, corpus).out ==
        pools.out);

  const auto pool_file = temp_file("pools.jsonl", pools.out);
  auto analysis = run_cli({"analyze", "--input", pool_file.string()});
  REQUIRE(analysis.code == cli::kExitOk);
  const Json a = Json::parse(analysis.out);
  CHECK(a["mean_phi"]["cabs_f1"].get<double>() == 1.0);
  CHECK(a["mean_phi"]["bleu"].get<double>() < 1.0);
  std::filesystem::remove(pool_file);

  CHECK(run_cli({"perturb", "--seed", "5", "--edits", "shuffle"}, corpus).code == cli::kExitInput);
}

TEST_CASE("analyze correlation matrix") {
  const auto scores = temp_file("matrix.csv",
                                "case_id,metric,score\nm1,a,0.1\nm1,b,0.2\nm2,a,0.5\nm2,b,0.7\nm3,a,0.3\nm3,b,0.1\n");
  auto r = run_cli({"analyze", "--matrix", scores.string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.rfind("metric,a,b\n", 0) == 0);
  std::filesystem::remove(scores);
}

TEST_CASE("mcq build and score") {
  Json c;
  c["case_id"] = "q1";
  c["gt_units"] = Json::parse(cabs_test::kThreeUnitDoc);
  auto built = run_cli({"mcq", "build", "--seed", "3"}, c.dump() + "\n");
  REQUIRE(built.code == cli::kExitOk);
  const auto items = json_lines(built.out);
  CHECK(items.size() == 12);
  CHECK(run_cli({"mcq", "build", "--seed", "3"}, c.dump() + "\n").out == built.out);

  std::string preds;
  for (const auto& it : items) preds += Json{{"item_id", it["item_id"]}, {"answer", it["answer"]}}.dump() + "\n";
  const auto pred_file = temp_file("preds.jsonl", preds);
  auto scored = run_cli({"mcq", "score", "--predictions", pred_file.string()}, built.out);
  REQUIRE(scored.code == cli::kExitOk);
  CHECK(Json::parse(scored.out)["average"] == 1.0);

  std::ofstream(pred_file) << Json{{"item_id", items[0]["item_id"]}, {"answer", "A"}}.dump() << "\n";
  auto missing = run_cli({"mcq", "score", "--predictions", pred_file.string()}, built.out);
  CHECK(missing.code == cli::kExitInput);
  CHECK(Json::parse(missing.err)["error"] == "missing_prediction");
  std::filesystem::remove(pred_file);
}

TEST_CASE("llm matcher through an injected transport") {
  auto stub = std::make_shared<cabs_test::StubTransport>([](const std::string&, int) {
    return cabs_test::ok(R"({"abnormalities":[
      {"name":"ground-glass opacity","hit":true,"location_match":true,"attribute_match":true},
      {"name":"fatty liver","hit":true,"location_match":true,"attribute_match":true},
      {"name":"pleural effusion","hit":true,"location_match":true,"attribute_match":true}],"false_positive":[]})");
  });
  Json c;
  c["case_id"] = "l1";
  c["gt_units"] = Json::parse(cabs_test::kThreeUnitDoc);
  c["pred_report"] = "whatever the model wrote";
  const auto dir = std::filesystem::temp_directory_path() / "cabs_cli_cache";
  std::filesystem::remove_all(dir);
  auto r = run_cli({"eval", "--matcher", "llm", "--model", "m", "--endpoint", "http://stub/v1", "--cache-dir",
                    dir.string()},
                   c.dump() + "\n", stub);
  REQUIRE(r.code == cli::kExitOk);
  CHECK(Json::parse(r.out)["aggregate"]["recall"].get<double>() == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(stub->total() == 1);
  std::filesystem::remove_all(dir);

  auto down = std::make_shared<cabs_test::StubTransport>(
      [](const std::string&, int) { return llm::HttpResponse{401, "", false}; });
  auto failed = run_cli({"eval", "--matcher", "llm", "--model", "m", "--endpoint", "http://stub/v1"}, c.dump() + "\n",
                        down);
  CHECK(failed.code == cli::kExitBackend);
  CHECK(Json::parse(failed.err)["error"] == "auth_error");

  CHECK(run_cli({"eval", "--matcher", "llm"}, c.dump() + "\n").code == cli::kExitInput);
}

}
