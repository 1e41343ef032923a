#pragma once

// Structured clinical-fact data model: abnormality units, report
// decompositions, and their canonical JSON wire form.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cabs/errors.hpp"
#include "json.hpp"

namespace cabs_eval {

using Json = nlohmann::ordered_json;

enum class Organ {
  kTrachea,
  kHeart,
  kLung,
  kEsophagus,
  kVessel,
  kSpine,
  kLiver,
  kPancreas,
  kSpleen,
  kStomach,
  kBowel,
  kKidney,
  kOther,
};

inline constexpr std::array<Organ, 13> kAllOrgans = {
    Organ::kTrachea, Organ::kHeart,    Organ::kLung,   Organ::kEsophagus, Organ::kVessel,
    Organ::kSpine,   Organ::kLiver,    Organ::kPancreas, Organ::kSpleen,  Organ::kStomach,
    Organ::kBowel,   Organ::kKidney,   Organ::kOther};

enum class Certainty { kDefinite, kPossible };

std::string_view to_string(Organ organ);
std::string_view to_string(Certainty certainty);

/// Exact label lookup ("lung" -> kLung). No alias folding.
std::optional<Organ> organ_from_label(std::string_view label);
std::optional<Certainty> certainty_from_label(std::string_view label);

/// Folds a free-form organ label onto the 13-label set using the shipped
/// alias table. Case and whitespace insensitive; unknown labels map to
/// kOther. Throws kEmptyLabel on blank input.
Organ canonical_organ(std::string_view label);

/// Version of the shipped organ alias table.
int organ_alias_table_version();

struct AbnormalityUnit {
  std::string name;
  std::string evidence;
  std::string location;
  std::string attributes;
  Certainty certainty = Certainty::kDefinite;
  Organ organ = Organ::kOther;

  friend bool operator==(const AbnormalityUnit&, const AbnormalityUnit&) = default;
};

/// Throws kSchemaViolation (with `path`) when the unit breaks an invariant:
/// blank name or evidence, or a name that repeats a location/attribute
/// token. Organ words are exempt from the repetition rule since disease
/// names legitimately carry them ("fatty liver" located in "liver").
void validate_unit(const AbnormalityUnit& unit, const std::string& path = "");

/// Ordered list of abnormality units in document order. The flag
/// report_has_abnormality is derived, so it cannot disagree with the list.
class ReportDecomposition {
 public:
  ReportDecomposition() = default;
  /// Validates every unit; throws kSchemaViolation on the first failure.
  explicit ReportDecomposition(std::vector<AbnormalityUnit> units);

  const std::vector<AbnormalityUnit>& units() const noexcept { return units_; }
  std::size_t size() const noexcept { return units_.size(); }
  bool empty() const noexcept { return units_.empty(); }
  bool report_has_abnormality() const noexcept { return !units_.empty(); }
  const AbnormalityUnit& operator[](std::size_t i) const { return units_[i]; }

  friend bool operator==(const ReportDecomposition&, const ReportDecomposition&) = default;

 private:
  std::vector<AbnormalityUnit> units_;
};

Json unit_to_json(const AbnormalityUnit& unit);
AbnormalityUnit unit_from_json(const Json& j, const std::string& path);

Json decomposition_to_json(const ReportDecomposition& d);
/// `path` prefixes every error path, e.g. "gt_units" yields
/// "gt_units.abnormalities[0].certainty".
ReportDecomposition decomposition_from_json(const Json& j, const std::string& path = "");

/// Parses canonical decomposition text. Throws kMalformedJson or
/// kSchemaViolation; unknown keys are rejected.
ReportDecomposition parse_decomposition(std::string_view text);
std::string serialize_decomposition(const ReportDecomposition& d);

/// One line of a corpus JSONL file.
struct CaseRecord {
  std::string case_id;
  std::optional<std::string> gt_report;
  std::optional<ReportDecomposition> gt_units;
  std::optional<std::string> pred_report;
  std::optional<ReportDecomposition> pred_units;

  friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

CaseRecord case_from_json(const Json& j);
Json case_to_json(const CaseRecord& c);
CaseRecord parse_case_line(std::string_view line);

/// Shared helpers for strict object decoding.
namespace schema {

std::string join_path(const std::string& base, std::string_view key);
std::string index_path(const std::string& base, std::size_t i);
void require_object(const Json& j, const std::string& path);
void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                         const std::string& path);
const Json& require_field(const Json& j, std::string_view key, const std::string& path);
std::string require_string(const Json& j, std::string_view key, const std::string& path);
bool require_bool(const Json& j, std::string_view key, const std::string& path);
double require_number(const Json& j, std::string_view key, const std::string& path);
const Json& require_array(const Json& j, std::string_view key, const std::string& path);
Json parse_json_text(std::string_view text);

}  // namespace schema

}  // namespace cabs_eval
