#pragma once

// Multiple-choice question construction from abnormality units, negative
// name sampling, and subtask scoring.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cabs/core.hpp"

namespace cabs_eval {

namespace llm {
class LlmClient;
}

namespace mcq {

enum class ItemType { kExistencePositive, kExistenceNegative, kLocation, kAttribute };

std::string_view to_string(ItemType type);
std::optional<ItemType> item_type_from_label(std::string_view label);

struct McqItem {
  ItemType type = ItemType::kExistencePositive;
  std::string question;
  std::vector<std::string> options;  ///< "A. Yes", "B. No", ...
  std::string answer;                ///< single option letter

  /// Option text of the keyed answer, without the "A. " prefix.
  std::string answer_text() const;

  friend bool operator==(const McqItem&, const McqItem&) = default;
};

struct McqSet {
  std::vector<McqItem> items;
  friend bool operator==(const McqSet&, const McqSet&) = default;
};

/// Throws kSchemaViolation (with path) on any item-level rule: option count,
/// letter prefixes, answer key, Yes/No keying of existence items, forbidden
/// report-referencing words in the question.
void validate_item(const McqItem& item, const std::string& path = "");

/// Set-level rules on top of validate_item: 2 to 4 items, exactly one of
/// each existence type, at most one location and one attribute item.
void validate_set(const McqSet& set, const std::string& path = "");

Json item_to_json(const McqItem& item);
Json set_to_json(const McqSet& set);
McqSet set_from_json(const Json& j, const std::string& path = "");

/// Templated, LLM-free construction. Location and attribute items appear
/// only when the unit carries that field. Correct-option positions and
/// Yes/No order are drawn from `seed`.
/// Throws kPoolTooSmall, kInvalidArgument (negative_name equals the unit).
McqSet build_mcq(const AbnormalityUnit& unit, std::string_view negative_name,
                 const std::vector<std::string>& distractor_locations,
                 const std::vector<std::string>& distractor_attributes, std::uint64_t seed);

/// LLM construction through the MCQ prompt; the reply must pass
/// validate_set plus the unit-specific count rules.
McqSet build_mcq(const AbnormalityUnit& unit, std::string_view negative_name,
                 llm::LlmClient& client);

/// Uniform seeded draw from corpus names absent from the case (compared
/// after name normalization and synonym folding). Throws kNoNegativeAvailable.
std::string sample_negative_name(const std::vector<AbnormalityUnit>& case_units,
                                 const std::vector<std::string>& corpus_names, std::uint64_t seed);

/// One line of the MCQ corpus JSONL.
struct McqRecord {
  std::string case_id;
  std::string item_id;
  McqItem item;
};

Json record_to_json(const McqRecord& r);
McqRecord record_from_json(const Json& j);

struct SubtaskAccuracy {
  std::optional<double> existence;
  std::optional<double> location;
  std::optional<double> attribute;
  double average = 0.0;  ///< unweighted mean over the subtasks present
  std::size_t item_count = 0;
};

/// Throws kMissingPrediction for an item without a prediction and
/// kEmptyCorpus when `records` is empty.
SubtaskAccuracy score_mcq(const std::vector<McqRecord>& records,
                          const std::map<std::string, std::string>& predictions);

Json accuracy_to_json(const SubtaskAccuracy& acc);

}  // namespace mcq
}  // namespace cabs_eval
