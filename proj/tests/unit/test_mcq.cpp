#include "doctest.h"

#include "cabs/lexicon.hpp"
#include "cabs/mcq.hpp"

using namespace cabs_eval;
using namespace cabs_eval::mcq;

namespace {

const AbnormalityUnit kNodule{"nodule", "6 mm nodule in the right upper lobe", "right upper lobe", "6 mm",
                              Certainty::kDefinite, Organ::kLung};

McqSet build(const AbnormalityUnit& u, std::uint64_t seed = 1) {
  const auto& lex = Lexicon::builtin();
  return build_mcq(u, "pleural effusion", lex.all_locations(), lex.attributes(), seed);
}

McqItem yes_no(ItemType t, std::string answer) {
  return {t, "On this chest CT, is there a 'nodule' abnormality?", {"A. Yes", "B. No"}, std::move(answer)};
}

}  // namespace

TEST_SUITE("mcq") {

TEST_CASE("item counts follow the unit") {
  const auto full = build(kNodule);
  CHECK(full.items.size() == 4);
  auto bare = kNodule;
  bare.location.clear();
  bare.attributes.clear();
  CHECK(build(bare).items.size() == 2);
  auto loc_only = kNodule;
  loc_only.attributes.clear();
  CHECK(build(loc_only).items.size() == 3);
}

TEST_CASE("built items are keyed correctly") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto set = build(kNodule, seed);
    CHECK_NOTHROW(validate_set(set));
    for (const auto& item : set.items) {
      switch (item.type) {
        case ItemType::kExistencePositive: CHECK(item.answer_text() == "Yes"); break;
        case ItemType::kExistenceNegative: CHECK(item.answer_text() == "No"); break;
        case ItemType::kLocation: CHECK(item.answer_text() == "right upper lobe"); break;
        case ItemType::kAttribute: CHECK(item.answer_text() == "6 mm"); break;
      }
    }
  }
  CHECK(build(kNodule, 3) == build(kNodule, 3));
}

TEST_CASE("construction errors") {
  const auto& lex = Lexicon::builtin();
  CHECK_THROWS_AS(build_mcq(kNodule, "Nodules", lex.all_locations(), lex.attributes(), 1), Error);
  try {
    build_mcq(kNodule, "mass", {"right upper lobe", "left upper lobe"}, lex.attributes(), 1);
    FAIL("expected kPoolTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPoolTooSmall);
  }
}

TEST_CASE("item validation") {
  CHECK_NOTHROW(validate_item(yes_no(ItemType::kExistencePositive, "A")));
  CHECK_THROWS_AS(validate_item(yes_no(ItemType::kExistencePositive, "B")), Error);
  CHECK_THROWS_AS(validate_item(yes_no(ItemType::kExistenceNegative, "A")), Error);
  CHECK_THROWS_AS(validate_item(yes_no(ItemType::kExistencePositive, "C")), Error);

  auto forbidden = yes_no(ItemType::kExistencePositive, "A");
  forbidden.question = "Does the REPORT mention a nodule?";
  CHECK_THROWS_AS(validate_item(forbidden), Error);

  McqItem loc{ItemType::kLocation, "Where is the 'nodule' mainly located?",
              {"A. left lobe", "B. right lobe", "C. apex"}, "A"};
  CHECK_THROWS_AS(validate_item(loc), Error);
  loc.options.push_back("D. hilum");
  CHECK_NOTHROW(validate_item(loc));
  loc.options[3] = "E. hilum";
  CHECK_THROWS_AS(validate_item(loc), Error);

  McqSet one_existence{{yes_no(ItemType::kExistencePositive, "A")}};
  CHECK_THROWS_AS(validate_set(one_existence), Error);
}

TEST_CASE("set json round trip") {
  const auto set = build(kNodule, 9);
  const std::string text = set_to_json(set).dump();
  CHECK(set_from_json(Json::parse(text)) == set);
  CHECK_THROWS_AS(set_from_json(Json::parse(R"({"items":[],"extra":1})")), Error);
}

TEST_CASE("negative sampling") {
  const std::vector<AbnormalityUnit> units = {kNodule};
  CHECK(sample_negative_name(units, {"nodule", "effusion"}, 1) == "effusion");
  CHECK(sample_negative_name(units, {"nodules", "effusion"}, 2) == "effusion");
  CHECK_THROWS_AS(sample_negative_name(units, {"nodule", "Nodule"}, 1), Error);
  const std::vector<std::string> pool = {"effusion", "mass", "cyst", "atelectasis", "emphysema"};
  CHECK(sample_negative_name(units, pool, 77) == sample_negative_name(units, pool, 77));
}

TEST_CASE("subtask scoring") {
  std::vector<McqRecord> records;
  const auto set = build(kNodule, 4);
  for (const auto& item : set.items) records.push_back({"c1", "c1:0:" + std::string(to_string(item.type)), item});
  std::map<std::string, std::string> all_right, mixed;
  for (const auto& r : records) {
    all_right[r.item_id] = r.item.answer;
    std::string wrong = r.item.answer == "A" ? "B" : "A";
    mixed[r.item_id] = r.item.type == ItemType::kLocation ? wrong : r.item.answer;
  }
  const auto perfect = score_mcq(records, all_right);
  CHECK(perfect.average == 1.0);
  CHECK(perfect.existence == 1.0);
  CHECK(perfect.item_count == 4);

  const auto m = score_mcq(records, mixed);
  CHECK(m.existence == 1.0);
  CHECK(m.location == 0.0);
  CHECK(m.attribute == 1.0);
  CHECK(m.average == doctest::Approx(2.0 / 3));

  std::vector<McqRecord> no_location;
  for (const auto& r : records) {
    if (r.item.type != ItemType::kLocation) no_location.push_back(r);
  }
  const auto nl = score_mcq(no_location, mixed);
  CHECK_FALSE(nl.location.has_value());
  CHECK(nl.average == 1.0);

  mixed.erase(records[0].item_id);
  CHECK_THROWS_AS(score_mcq(records, mixed), Error);
  CHECK_THROWS_AS(score_mcq({}, all_right), Error);
  const Json j = accuracy_to_json(nl);
  CHECK(j["location"].is_null());
}

TEST_CASE("record json") {
  const auto set = build(kNodule, 4);
  const McqRecord r{"c1", "c1:0:location", set.items[2]};
  const Json j = record_to_json(r);
  CHECK(j.contains("question"));
  CHECK_FALSE(j.contains("item"));
  const auto back = record_from_json(j);
  CHECK(back.item == r.item);
  CHECK(back.item_id == r.item_id);
  for (auto t : {ItemType::kExistencePositive, ItemType::kExistenceNegative, ItemType::kLocation, ItemType::kAttribute}) {
    CHECK(item_type_from_label(to_string(t)) == t);
  }
}

}
