#include "cabs/core.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "cabs/text.hpp"
#include "embedded_data.hpp"

namespace cabs_eval {

namespace {

constexpr std::array<std::string_view, 13> kOrganLabels = {
    "trachea", "heart",  "lung",    "esophagus", "vessel", "spine", "liver",
    "pancreas", "spleen", "stomach", "bowel",     "kidney", "other"};

struct OrganAliasTable {
  int version = 0;
  std::map<std::string, Organ, std::less<>> aliases;  // folded alias -> organ
  std::set<std::string, std::less<>> organ_words;     // single-token aliases and labels
};

std::string fold_label(std::string_view label) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(label)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

const OrganAliasTable& alias_table() {
  static const OrganAliasTable table = [] {
    OrganAliasTable t;
    const Json doc = Json::parse(data::kOrganAliasesJson);
    t.version = doc.at("version").get<int>();
    for (std::size_t i = 0; i < kOrganLabels.size(); ++i) {
      t.aliases.emplace(std::string(kOrganLabels[i]), kAllOrgans[i]);
    }
    for (const auto& [alias, label] : doc.at("aliases").items()) {
      auto organ = organ_from_label(label.get<std::string>());
      if (!organ) throw std::logic_error("organ alias table: bad label for " + alias);
      t.aliases.emplace(fold_label(alias), *organ);
    }
    for (const auto& [alias, organ] : t.aliases) {
      if (alias.find(' ') == std::string::npos) t.organ_words.insert(alias);
    }
    return t;
  }();
  return table;
}

bool is_organ_word(std::string_view token) {
  return alias_table().organ_words.count(token) > 0;
}

std::set<std::string> content_tokens(std::string_view s) {
  std::set<std::string> out;
  for (auto& t : word_tokens(s)) {
    if (!is_stopword(t) && !is_organ_word(t)) out.insert(std::move(t));
  }
  return out;
}

}  // namespace

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedJson: return "malformed_json";
    case ErrorCode::kSchemaViolation: return "schema_violation";
    case ErrorCode::kEmptyLabel: return "empty_label";
    case ErrorCode::kEmptyReport: return "empty_report";
    case ErrorCode::kExtractionFailed: return "extraction_failed";
    case ErrorCode::kMatchFailed: return "match_failed";
    case ErrorCode::kLengthMismatch: return "length_mismatch";
    case ErrorCode::kInvalidCounts: return "invalid_counts";
    case ErrorCode::kGroupTooSmall: return "group_too_small";
    case ErrorCode::kNonPositiveRatio: return "non_positive_ratio";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kEmptyReference: return "empty_reference";
    case ErrorCode::kDuplicateKey: return "duplicate_key";
    case ErrorCode::kBadNumber: return "bad_number";
    case ErrorCode::kEmptyCorpus: return "empty_corpus";
    case ErrorCode::kInsufficientUnits: return "insufficient_units";
    case ErrorCode::kMissingCell: return "missing_cell";
    case ErrorCode::kZeroVariance: return "zero_variance";
    case ErrorCode::kPoolTooSmall: return "pool_too_small";
    case ErrorCode::kNoNegativeAvailable: return "no_negative_available";
    case ErrorCode::kMissingPrediction: return "missing_prediction";
    case ErrorCode::kMissingBinding: return "missing_binding";
    case ErrorCode::kUnparseable: return "unparseable";
    case ErrorCode::kAuthError: return "auth_error";
    case ErrorCode::kExhaustedRetries: return "exhausted_retries";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kResponseShape: return "response_shape";
    case ErrorCode::kRequestRejected: return "request_rejected";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

std::string_view to_string(Organ organ) {
  return kOrganLabels[static_cast<std::size_t>(organ)];
}

std::string_view to_string(Certainty certainty) {
  return certainty == Certainty::kDefinite ? "definite" : "possible";
}

std::optional<Organ> organ_from_label(std::string_view label) {
  for (std::size_t i = 0; i < kOrganLabels.size(); ++i) {
    if (kOrganLabels[i] == label) return kAllOrgans[i];
  }
  return std::nullopt;
}

std::optional<Certainty> certainty_from_label(std::string_view label) {
  if (label == "definite") return Certainty::kDefinite;
  if (label == "possible") return Certainty::kPossible;
  return std::nullopt;
}

Organ canonical_organ(std::string_view label) {
  const std::string folded = fold_label(label);
  if (folded.empty()) throw Error(ErrorCode::kEmptyLabel, "organ label is empty");
  const auto& aliases = alias_table().aliases;
  if (auto it = aliases.find(folded); it != aliases.end()) return it->second;
  return Organ::kOther;
}

int organ_alias_table_version() { return alias_table().version; }

void validate_unit(const AbnormalityUnit& unit, const std::string& path) {
  if (trim(unit.name).empty()) {
    throw Error(ErrorCode::kSchemaViolation, "name must be non-empty", schema::join_path(path, "name"));
  }
  if (trim(unit.evidence).empty()) {
    throw Error(ErrorCode::kSchemaViolation, "evidence must be non-empty",
                schema::join_path(path, "evidence"));
  }
  const auto location = content_tokens(unit.location);
  const auto attributes = content_tokens(unit.attributes);
  for (const auto& t : content_tokens(unit.name)) {
    if (location.count(t)) {
      throw Error(ErrorCode::kSchemaViolation, "name repeats location token '" + t + "'",
                  schema::join_path(path, "name"));
    }
    if (attributes.count(t)) {
      throw Error(ErrorCode::kSchemaViolation, "name repeats attribute token '" + t + "'",
                  schema::join_path(path, "name"));
    }
  }
}

ReportDecomposition::ReportDecomposition(std::vector<AbnormalityUnit> units) : units_(std::move(units)) {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    validate_unit(units_[i], schema::index_path("abnormalities", i));
  }
}

// ---------------------------------------------------------------------------
// JSON codec

namespace schema {

std::string join_path(const std::string& base, std::string_view key) {
  if (base.empty()) return std::string(key);
  return base + "." + std::string(key);
}

std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

void require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kSchemaViolation, "expected an object", path);
  }
}

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                         const std::string& path) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::kSchemaViolation, "unknown key '" + key + "'", join_path(path, key));
    }
  }
}

const Json& require_field(const Json& j, std::string_view key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorCode::kSchemaViolation, "missing field '" + std::string(key) + "'",
                join_path(path, key));
  }
  return *it;
}

std::string require_string(const Json& j, std::string_view key, const std::string& path) {
  const Json& v = require_field(j, key, path);
  if (!v.is_string()) throw Error(ErrorCode::kSchemaViolation, "expected a string", join_path(path, key));
  return v.get<std::string>();
}

bool require_bool(const Json& j, std::string_view key, const std::string& path) {
  const Json& v = require_field(j, key, path);
  if (!v.is_boolean()) throw Error(ErrorCode::kSchemaViolation, "expected a boolean", join_path(path, key));
  return v.get<bool>();
}

double require_number(const Json& j, std::string_view key, const std::string& path) {
  const Json& v = require_field(j, key, path);
  if (!v.is_number()) throw Error(ErrorCode::kSchemaViolation, "expected a number", join_path(path, key));
  return v.get<double>();
}

const Json& require_array(const Json& j, std::string_view key, const std::string& path) {
  const Json& v = require_field(j, key, path);
  if (!v.is_array()) throw Error(ErrorCode::kSchemaViolation, "expected an array", join_path(path, key));
  return v;
}

Json parse_json_text(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
}

}  // namespace schema

Json unit_to_json(const AbnormalityUnit& unit) {
  Json j = Json::object();
  j["name"] = unit.name;
  j["evidence"] = unit.evidence;
  j["location"] = unit.location;
  j["attributes"] = unit.attributes;
  j["certainty"] = std::string(to_string(unit.certainty));
  j["organ"] = std::string(to_string(unit.organ));
  return j;
}

AbnormalityUnit unit_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  require_object(j, path);
  reject_unknown_keys(j, {"name", "evidence", "location", "attributes", "certainty", "organ"}, path);
  AbnormalityUnit u;
  u.name = require_string(j, "name", path);
  u.evidence = require_string(j, "evidence", path);
  u.location = require_string(j, "location", path);
  u.attributes = require_string(j, "attributes", path);
  const std::string certainty = require_string(j, "certainty", path);
  auto c = certainty_from_label(certainty);
  if (!c) {
    throw Error(ErrorCode::kSchemaViolation,
                "certainty must be one of definite or possible, got '" + certainty + "'",
                join_path(path, "certainty"));
  }
  u.certainty = *c;
  const std::string organ = require_string(j, "organ", path);
  auto o = organ_from_label(organ);
  if (!o) {
    throw Error(ErrorCode::kSchemaViolation, "organ '" + organ + "' is not a normalized organ label",
                join_path(path, "organ"));
  }
  u.organ = *o;
  validate_unit(u, path);
  return u;
}

Json decomposition_to_json(const ReportDecomposition& d) {
  Json j = Json::object();
  Json list = Json::array();
  for (const auto& u : d.units()) list.push_back(unit_to_json(u));
  j["abnormalities"] = std::move(list);
  j["report_has_abnormality"] = d.report_has_abnormality();
  return j;
}

ReportDecomposition decomposition_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  require_object(j, path);
  reject_unknown_keys(j, {"abnormalities", "report_has_abnormality"}, path);
  const Json& list = require_array(j, "abnormalities", path);
  const bool flag = require_bool(j, "report_has_abnormality", path);
  std::vector<AbnormalityUnit> units;
  units.reserve(list.size());
  const std::string list_path = join_path(path, "abnormalities");
  for (std::size_t i = 0; i < list.size(); ++i) {
    units.push_back(unit_from_json(list[i], index_path(list_path, i)));
  }
  if (flag != !units.empty()) {
    throw Error(ErrorCode::kSchemaViolation,
                "report_has_abnormality disagrees with the abnormality list",
                join_path(path, "report_has_abnormality"));
  }
  ReportDecomposition d;
  try {
    d = ReportDecomposition(std::move(units));
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), join_path(path, e.path()));
  }
  return d;
}

ReportDecomposition parse_decomposition(std::string_view text) {
  return decomposition_from_json(schema::parse_json_text(text));
}

std::string serialize_decomposition(const ReportDecomposition& d) {
  return decomposition_to_json(d).dump();
}

CaseRecord case_from_json(const Json& j) {
  using namespace schema;
  require_object(j, "");
  reject_unknown_keys(j, {"case_id", "gt_report", "gt_units", "pred_report", "pred_units"}, "");
  CaseRecord c;
  c.case_id = require_string(j, "case_id", "");
  if (j.contains("gt_report")) c.gt_report = require_string(j, "gt_report", "");
  if (j.contains("pred_report")) c.pred_report = require_string(j, "pred_report", "");
  if (j.contains("gt_units")) c.gt_units = decomposition_from_json(j.at("gt_units"), "gt_units");
  if (j.contains("pred_units")) c.pred_units = decomposition_from_json(j.at("pred_units"), "pred_units");
  return c;
}

Json case_to_json(const CaseRecord& c) {
  Json j = Json::object();
  j["case_id"] = c.case_id;
  if (c.gt_report) j["gt_report"] = *c.gt_report;
  if (c.gt_units) j["gt_units"] = decomposition_to_json(*c.gt_units);
  if (c.pred_report) j["pred_report"] = *c.pred_report;
  if (c.pred_units) j["pred_units"] = decomposition_to_json(*c.pred_units);
  return j;
}

CaseRecord parse_case_line(std::string_view line) {
  return case_from_json(schema::parse_json_text(line));
}

}  // namespace cabs_eval
