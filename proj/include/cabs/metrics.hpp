#pragma once

// The CABS score suite: Entity Core (precision/recall/F1), Clinical
// Fidelity (location/attribute/fully-consistent accuracy over hit units)
// and Organ Coverage (macro-averaged per-organ hit and full-match rates).

#include <string>
#include <vector>

#include "cabs/core.hpp"
#include "cabs/matching.hpp"

namespace cabs_eval {

/// Smoothing constant shared by every ratio in the suite.
inline constexpr double kMetricEpsilon = 1e-8;

struct EntityCore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClinicalFidelity {
  double location_accuracy = 0.0;
  double attribute_accuracy = 0.0;
  double fully_consistent_accuracy = 0.0;
};

struct OrganCoverage {
  double or_rate = 0.0;
  double fmor_rate = 0.0;
};

struct MetricReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double location_accuracy = 0.0;
  double attribute_accuracy = 0.0;
  double fully_consistent_accuracy = 0.0;
  double or_rate = 0.0;
  double fmor_rate = 0.0;
  std::size_t hit_count = 0;
  std::size_t fp_count = 0;
  std::size_t gt_count = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Names of the score fields in serialization order.
const std::vector<std::string>& metric_score_names();
/// Score by name; throws kInvalidArgument on an unknown name.
double metric_score(const MetricReport& r, std::string_view name);

EntityCore entity_core(const MatchResult& m);
ClinicalFidelity clinical_fidelity(const MatchResult& m);
/// Throws kLengthMismatch when judgments and gt units are not 1:1.
OrganCoverage organ_coverage(const MatchResult& m, const ReportDecomposition& gt);

MetricReport evaluate(const MatchResult& m, const ReportDecomposition& gt);

enum class Averaging { kMacro, kMicro };

/// Macro mean of each score over cases; counts are summed.
/// Throws kEmptyCorpus.
MetricReport aggregate(const std::vector<MetricReport>& per_case);

struct EvaluatedCase {
  MatchResult match;
  ReportDecomposition gt;
};

/// Macro: mean of per-case reports. Micro: one evaluation over the pooled
/// corpus (all judgments and organs concatenated, FP and M summed).
MetricReport aggregate(const std::vector<EvaluatedCase>& cases, Averaging mode);

Json report_to_json(const MetricReport& r);
MetricReport report_from_json(const Json& j, const std::string& path = "");

std::string csv_header();
std::string csv_row(const std::string& case_id, const MetricReport& r);

}  // namespace cabs_eval
