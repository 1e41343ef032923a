#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cabs/surface_metrics.hpp"

using namespace cabs_eval;
using namespace cabs_eval::surface;

TEST_SUITE("surface_metrics") {

TEST_CASE("tokenizer") {
  CHECK(tokenize("Small, LEFT effusion.") == std::vector<std::string>{"small", ",", "left", "effusion", "."});
  CHECK(tokenize("  ").empty());
}

TEST_CASE("bleu") {
  const auto ref = tokenize("a small nodule is seen in the right upper lobe");
  CHECK(bleu(ref, ref) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bleu(tokenize("x y z w v"), ref) <= 1e-2);

  const std::vector<std::string> r = {"a", "b", "c", "d", "e", "f", "g", "h"};
  const std::vector<std::string> half = {"a", "b", "c", "d"};
  CHECK(bleu(half, r) == doctest::Approx(std::exp(1.0 - 2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(bleu(ref, std::vector<std::string>{}), Error);
  CHECK_THROWS_AS(bleu(ref, ref, 5), Error);
  CHECK(bleu(std::string_view("The cat."), std::string_view("the cat ."), 2) == doctest::Approx(1.0));
}

TEST_CASE("rouge-l") {
  const std::vector<std::string> a = {"a", "b", "c", "d"}, b = {"a", "c", "d", "e"};
  CHECK(lcs_length(a, b) == 3);
  const auto d = rouge_l_detail(a, b);
  CHECK(d.precision == 0.75);
  CHECK(d.recall == 0.75);
  CHECK(d.f == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(rouge_l(a, a) == doctest::Approx(1.0));
  CHECK(rouge_l(a, std::vector<std::string>{"x", "y"}) == 0.0);
  CHECK_THROWS_AS(rouge_l(a, std::vector<std::string>{}), Error);
}

TEST_CASE("external scores") {
  const auto t = parse_score_csv("case_id,metric,score\nc1,meteor,0.5\nc2,meteor,0.25\n");
  CHECK(t.size() == 2);
  CHECK(t.get("c2", "meteor") == 0.25);
  CHECK_FALSE(t.get("c3", "meteor").has_value());
  CHECK(t.cases() == std::vector<std::string>{"c1", "c2"});

  auto code = [](const std::string& text) {
    try {
      parse_score_csv(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  CHECK(code("case_id,metric,score\nc1,m,0.5\nc1,m,0.6\n") == ErrorCode::kDuplicateKey);
  CHECK(code("case_id,metric,score\nc1,m,NaN\n") == ErrorCode::kBadNumber);
  CHECK(code("case_id,metric,score\nc1,m,abc\n") == ErrorCode::kBadNumber);
  CHECK(code("id,metric,score\n") == ErrorCode::kSchemaViolation);
  CHECK(code("case_id,metric,score\nc1,m\n") == ErrorCode::kSchemaViolation);

  const auto path = std::filesystem::temp_directory_path() / "cabs_scores_test.csv";
  std::ofstream(path) << "case_id,metric,score\nc1,radgraph,0.1\n";
  CHECK(load_external_scores(path).get("c1", "radgraph") == 0.1);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_external_scores(path), Error);
}

}
