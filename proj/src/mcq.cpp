#include "cabs/mcq.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "cabs/lexicon.hpp"
#include "cabs/llm_client.hpp"
#include "cabs/matching.hpp"
#include "cabs/text.hpp"

namespace cabs_eval::mcq {

namespace {

constexpr std::array<std::string_view, 4> kTypeLabels = {"existence_positive", "existence_negative", "location",
                                                         "attribute"};
constexpr std::array<std::string_view, 3> kForbidden = {"report", "findings", "impression"};

std::string letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

std::string option_body(const std::string& option) { return option.size() >= 3 ? option.substr(3) : std::string{}; }

bool is_existence(ItemType t) { return t == ItemType::kExistencePositive || t == ItemType::kExistenceNegative; }

// Up to three distinct pool entries that the matcher would not accept as
// the correct value.
std::vector<std::string> pick_distractors(const std::string& correct, const std::vector<std::string>& pool,
                                          bool (*equivalent)(std::string_view, std::string_view),
                                          SeededRng& rng) {
  std::vector<std::string> candidates;
  std::set<std::string> seen{normalize_phrase(correct)};
  for (const auto& p : pool) {
    const std::string t = trim(p);
    if (t.empty() || !seen.insert(normalize_phrase(t)).second) continue;
    if (equivalent(correct, t) || equivalent(t, correct)) continue;
    candidates.push_back(t);
  }
  if (candidates.size() < 3) {
    throw Error(ErrorCode::kPoolTooSmall, "need at least 3 usable distractors, have " +
                                              std::to_string(candidates.size()));
  }
  rng.shuffle(candidates);
  candidates.resize(3);
  return candidates;
}

McqItem four_choice(ItemType type, std::string question, const std::string& correct,
                    std::vector<std::string> distractors, SeededRng& rng) {
  McqItem item;
  item.type = type;
  item.question = std::move(question);
  const std::size_t pos = rng.index(4);
  distractors.insert(distractors.begin() + static_cast<std::ptrdiff_t>(pos), correct);
  for (std::size_t i = 0; i < distractors.size(); ++i) item.options.push_back(letter(i) + ". " + distractors[i]);
  item.answer = letter(pos);
  return item;
}

McqItem yes_no(ItemType type, std::string question, bool answer_yes, SeededRng& rng) {
  McqItem item;
  item.type = type;
  item.question = std::move(question);
  const bool yes_first = rng.index(2) == 0;
  item.options = {yes_first ? "A. Yes" : "A. No", yes_first ? "B. No" : "B. Yes"};
  item.answer = (yes_first == answer_yes) ? "A" : "B";
  return item;
}

void check_unit_counts(const McqSet& set, const AbnormalityUnit& unit) {
  const auto count = [&](ItemType t) {
    return std::count_if(set.items.begin(), set.items.end(), [&](const McqItem& i) { return i.type == t; });
  };
  if ((count(ItemType::kLocation) == 1) != !unit.location.empty()) {
    throw Error(ErrorCode::kSchemaViolation, "a location item is required exactly when the location is set", "items");
  }
  if ((count(ItemType::kAttribute) == 1) != !unit.attributes.empty()) {
    throw Error(ErrorCode::kSchemaViolation, "an attribute item is required exactly when attributes are set",
                "items");
  }
}

}  // namespace

std::string_view to_string(ItemType type) { return kTypeLabels[static_cast<std::size_t>(type)]; }

std::optional<ItemType> item_type_from_label(std::string_view label) {
  for (std::size_t i = 0; i < kTypeLabels.size(); ++i) {
    if (kTypeLabels[i] == label) return static_cast<ItemType>(i);
  }
  return std::nullopt;
}

std::string McqItem::answer_text() const {
  for (const auto& o : options) {
    if (o.size() >= 3 && o.compare(0, answer.size(), answer) == 0 && o.compare(1, 2, ". ") == 0) {
      return option_body(o);
    }
  }
  return {};
}

void validate_item(const McqItem& item, const std::string& path) {
  const auto fail = [&](const std::string& msg, std::string_view key) {
    throw Error(ErrorCode::kSchemaViolation, msg, schema::join_path(path, key));
  };
  if (trim(item.question).empty()) fail("question is empty", "question");
  const std::string lq = to_lower_ascii(item.question);
  for (auto w : kForbidden) {
    if (lq.find(w) != std::string::npos) fail("question mentions '" + std::string(w) + "'", "question");
  }
  const std::size_t want = is_existence(item.type) ? 2 : 4;
  if (item.options.size() != want) {
    fail(std::string(to_string(item.type)) + " needs " + std::to_string(want) + " options", "options");
  }
  std::set<std::string> bodies;
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    const std::string& o = item.options[i];
    if (o.size() < 4 || o.compare(0, 3, letter(i) + ". ") != 0 || trim(option_body(o)).empty()) {
      throw Error(ErrorCode::kSchemaViolation, "option must read '" + letter(i) + ". <text>'",
                  schema::index_path(schema::join_path(path, "options"), i));
    }
    if (!bodies.insert(normalize_phrase(option_body(o))).second) fail("options repeat", "options");
  }
  if (item.answer.size() != 1 || item.answer[0] < 'A' ||
      static_cast<std::size_t>(item.answer[0] - 'A') >= item.options.size()) {
    fail("answer must be one option letter", "answer");
  }
  if (is_existence(item.type)) {
    if (bodies != std::set<std::string>{"yes", "no"}) fail("existence options must be Yes and No", "options");
    const std::string keyed = to_lower_ascii(item.answer_text());
    const std::string expected = item.type == ItemType::kExistencePositive ? "yes" : "no";
    if (keyed != expected) fail(std::string(to_string(item.type)) + " must be keyed '" + expected + "'", "answer");
  }
}

void validate_set(const McqSet& set, const std::string& path) {
  const std::string items_path = schema::join_path(path, "items");
  if (set.items.size() < 2 || set.items.size() > 4) {
    throw Error(ErrorCode::kSchemaViolation, "item count must lie in [2, 4]", items_path);
  }
  std::array<int, 4> counts{};
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    validate_item(set.items[i], schema::index_path(items_path, i));
    counts[static_cast<std::size_t>(set.items[i].type)]++;
  }
  if (counts[0] != 1 || counts[1] != 1) {
    throw Error(ErrorCode::kSchemaViolation, "need exactly one item of each existence type", items_path);
  }
  if (counts[2] > 1 || counts[3] > 1) {
    throw Error(ErrorCode::kSchemaViolation, "at most one location and one attribute item", items_path);
  }
}

Json item_to_json(const McqItem& item) {
  Json j = Json::object();
  j["type"] = to_string(item.type);
  j["question"] = item.question;
  j["options"] = item.options;
  j["answer"] = item.answer;
  return j;
}

Json set_to_json(const McqSet& set) {
  Json items = Json::array();
  for (const auto& i : set.items) items.push_back(item_to_json(i));
  Json j = Json::object();
  j["items"] = std::move(items);
  return j;
}

namespace {

McqItem item_fields_from_json(const Json& j, const std::string& path) {
  McqItem item;
  const auto label = schema::require_string(j, "type", path);
  auto type = item_type_from_label(label);
  if (!type) throw Error(ErrorCode::kSchemaViolation, "unknown item type '" + label + "'", schema::join_path(path, "type"));
  item.type = *type;
  item.question = schema::require_string(j, "question", path);
  const Json& opts = schema::require_array(j, "options", path);
  for (std::size_t i = 0; i < opts.size(); ++i) {
    if (!opts[i].is_string()) {
      throw Error(ErrorCode::kSchemaViolation, "expected string",
                  schema::index_path(schema::join_path(path, "options"), i));
    }
    item.options.push_back(opts[i].get<std::string>());
  }
  item.answer = schema::require_string(j, "answer", path);
  return item;
}

}  // namespace

McqSet set_from_json(const Json& j, const std::string& path) {
  schema::require_object(j, path);
  schema::reject_unknown_keys(j, {"items"}, path);
  const Json& items = schema::require_array(j, "items", path);
  McqSet set;
  const std::string items_path = schema::join_path(path, "items");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string p = schema::index_path(items_path, i);
    schema::require_object(items[i], p);
    schema::reject_unknown_keys(items[i], {"type", "question", "options", "answer"}, p);
    set.items.push_back(item_fields_from_json(items[i], p));
  }
  validate_set(set, path);
  return set;
}

McqSet build_mcq(const AbnormalityUnit& unit, std::string_view negative_name,
                 const std::vector<std::string>& distractor_locations,
                 const std::vector<std::string>& distractor_attributes, std::uint64_t seed) {
  validate_unit(unit);
  if (trim(negative_name).empty()) throw Error(ErrorCode::kInvalidArgument, "negative_name is empty");
  if (names_match(unit.name, negative_name)) {
    throw Error(ErrorCode::kInvalidArgument, "negative_name names the target abnormality");
  }
  SeededRng rng(seed);
  McqSet set;
  set.items.push_back(
      yes_no(ItemType::kExistencePositive, "On this chest CT, is there a '" + unit.name + "' abnormality?", true, rng));
  set.items.push_back(yes_no(ItemType::kExistenceNegative,
                             "On this chest CT, is there a '" + trim(negative_name) + "' abnormality?", false, rng));
  if (!unit.location.empty()) {
    auto d = pick_distractors(unit.location, distractor_locations, &locations_match, rng);
    set.items.push_back(four_choice(ItemType::kLocation,
                                    "On this chest CT, where is the '" + unit.name + "' mainly located?",
                                    unit.location, std::move(d), rng));
  }
  if (!unit.attributes.empty()) {
    auto d = pick_distractors(unit.attributes, distractor_attributes, &attributes_match, rng);
    set.items.push_back(four_choice(ItemType::kAttribute, "On this chest CT, how does the '" + unit.name + "' appear?",
                                    unit.attributes, std::move(d), rng));
  }
  validate_set(set);
  return set;
}

McqSet build_mcq(const AbnormalityUnit& unit, std::string_view negative_name, llm::LlmClient& client) {
  validate_unit(unit);
  if (trim(negative_name).empty() || names_match(unit.name, negative_name)) {
    throw Error(ErrorCode::kInvalidArgument, "negative_name must name a different abnormality");
  }
  const std::string prompt = llm::render_prompt(
      llm::PromptTemplate::kMcq,
      {{"abnormality_json", unit_to_json(unit).dump(2)}, {"negative_name", trim(negative_name)}});
  auto parsed = llm::complete_validated(client, prompt, llm::ResponseSchema::kMcq,
                                        [&](const llm::ParsedResponse& r) {
                                          check_unit_counts(std::get<McqSet>(r), unit);
                                        });
  return std::get<McqSet>(std::move(parsed));
}

std::string sample_negative_name(const std::vector<AbnormalityUnit>& case_units,
                                 const std::vector<std::string>& corpus_names, std::uint64_t seed) {
  const auto& lex = Lexicon::builtin();
  std::set<std::string> present;
  for (const auto& u : case_units) present.insert(lex.canonical_key(u.name));
  std::vector<std::string> absent;
  std::set<std::string> seen;
  for (const auto& n : corpus_names) {
    const std::string t = trim(n);
    if (t.empty()) continue;
    const auto key = lex.canonical_key(t);
    if (present.count(key) || !seen.insert(key).second) continue;
    absent.push_back(t);
  }
  if (absent.empty()) throw Error(ErrorCode::kNoNegativeAvailable, "every corpus name occurs in the case");
  SeededRng rng(seed);
  return absent[rng.index(absent.size())];
}

Json record_to_json(const McqRecord& r) {
  Json j = Json::object();
  j["case_id"] = r.case_id;
  j["item_id"] = r.item_id;
  const Json fields = item_to_json(r.item);
  for (auto& [k, v] : fields.items()) j[k] = v;
  return j;
}

McqRecord record_from_json(const Json& j) {
  schema::require_object(j, "");
  schema::reject_unknown_keys(j, {"case_id", "item_id", "type", "question", "options", "answer"}, "");
  McqRecord r;
  r.case_id = schema::require_string(j, "case_id", "");
  r.item_id = schema::require_string(j, "item_id", "");
  r.item = item_fields_from_json(j, "");
  validate_item(r.item);
  return r;
}

SubtaskAccuracy score_mcq(const std::vector<McqRecord>& records, const std::map<std::string, std::string>& predictions) {
  if (records.empty()) throw Error(ErrorCode::kEmptyCorpus, "no MCQ items to score");
  std::array<std::size_t, 3> correct{}, total{};
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.item_id).second) throw Error(ErrorCode::kDuplicateKey, "duplicate item id", r.item_id);
    auto it = predictions.find(r.item_id);
    if (it == predictions.end()) throw Error(ErrorCode::kMissingPrediction, "no prediction for item", r.item_id);
    const std::size_t bucket = is_existence(r.item.type) ? 0 : (r.item.type == ItemType::kLocation ? 1 : 2);
    total[bucket]++;
    std::string letter_pred = trim(it->second);
    if (letter_pred.size() == 1) letter_pred[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(letter_pred[0])));
    if (letter_pred == r.item.answer) correct[bucket]++;
  }
  SubtaskAccuracy acc;
  acc.item_count = records.size();
  std::array<std::optional<double>*, 3> slots = {&acc.existence, &acc.location, &acc.attribute};
  double sum = 0.0;
  int present = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    if (total[b] == 0) continue;
    *slots[b] = static_cast<double>(correct[b]) / static_cast<double>(total[b]);
    sum += **slots[b];
    ++present;
  }
  acc.average = sum / present;
  return acc;
}

Json accuracy_to_json(const SubtaskAccuracy& acc) {
  Json j = Json::object();
  const auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  j["existence"] = opt(acc.existence);
  j["location"] = opt(acc.location);
  j["attribute"] = opt(acc.attribute);
  j["average"] = acc.average;
  j["item_count"] = acc.item_count;
  return j;
}

}  // namespace cabs_eval::mcq
