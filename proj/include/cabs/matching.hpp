#pragma once

// Per-unit hit / location / attribute judgments between a ground-truth
// decomposition and a prediction, produced either by the deterministic
// lexical matcher or by an LLM judge.

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cabs/core.hpp"

namespace cabs_eval {

namespace llm {
class LlmClient;
}

struct UnitJudgment {
  std::string name;
  bool hit = false;
  bool location_match = false;
  bool attribute_match = false;

  friend bool operator==(const UnitJudgment&, const UnitJudgment&) = default;
};

struct MatchResult {
  std::vector<UnitJudgment> judgments;     ///< one per ground-truth unit, gt order
  std::vector<std::string> false_positives;
  std::size_t pred_count = 0;              ///< M

  std::size_t hit_count() const;
  std::size_t fp_count() const { return false_positives.size(); }

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// Forces location/attribute matches to false on every missed unit.
/// Returns true if anything changed.
bool clamp_judgments(MatchResult& m);

/// Throws kSchemaViolation if a miss carries a sub-match or FP > M.
void validate_match(const MatchResult& m);

/// Judge-output wire form: {abnormalities:[{name,hit,location_match,
/// attribute_match}], false_positive:[{name}]}. pred_count is implied as
/// hits + false positives.
Json match_to_json(const MatchResult& m);

struct DecodedMatch {
  MatchResult result;
  bool repaired = false;  ///< a hit=false clamp violation was corrected
};
DecodedMatch match_from_json(const Json& j, const std::string& path = "");

std::string serialize_match(const MatchResult& m);
DecodedMatch parse_match(std::string_view text);

// ---------------------------------------------------------------------------
// Extraction

/// Rule-based extractor: splits sentences, drops negated ones, and emits one
/// unit per lexicon entity with location/attributes/certainty read from
/// surface cues. Units mentioned repeatedly are merged. Throws kEmptyReport.
ReportDecomposition extract_units(std::string_view report_text);

/// LLM extractor: renders the extraction prompt, validates the response,
/// and allows one strict reprompt. Throws kEmptyReport, kExtractionFailed.
ReportDecomposition extract_units(std::string_view report_text, llm::LlmClient& client);

// ---------------------------------------------------------------------------
// Matching

/// Deterministic greedy matcher. Ground-truth units are visited in order and
/// each takes the lowest-index unconsumed predicted unit with an equal or
/// synonymous name. Total function.
MatchResult lexical_match(const std::vector<AbnormalityUnit>& gt,
                          const std::vector<AbnormalityUnit>& pred);

bool names_match(std::string_view a, std::string_view b);
bool locations_match(std::string_view gt, std::string_view pred);
bool attributes_match(std::string_view gt, std::string_view pred);

using Prediction = std::variant<std::string, ReportDecomposition>;

/// Lexical backend; free-text predictions go through the rule-based extractor.
MatchResult match_reports(const ReportDecomposition& gt, const Prediction& pred);

/// LLM backend. Throws kMatchFailed, kLengthMismatch.
MatchResult match_reports(const ReportDecomposition& gt, const Prediction& pred,
                          llm::LlmClient& client);

/// Selects the backend at runtime: nullptr means lexical.
struct MatchBackend {
  llm::LlmClient* llm = nullptr;
};
MatchResult match_reports(const ReportDecomposition& gt, const Prediction& pred,
                          const MatchBackend& backend);
ReportDecomposition extract_units(std::string_view report_text, const MatchBackend& backend);

}  // namespace cabs_eval
