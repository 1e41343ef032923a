#include "cabs/metrics.hpp"

#include <map>
#include <sstream>

namespace cabs_eval {

namespace {

constexpr double kEps = kMetricEpsilon;

std::string format_score(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

const std::vector<std::string>& metric_score_names() {
  static const std::vector<std::string> names = {
      "precision",        "recall",   "f1",       "location_accuracy", "attribute_accuracy",
      "fully_consistent_accuracy", "or_rate", "fmor_rate"};
  return names;
}

double metric_score(const MetricReport& r, std::string_view name) {
  if (name == "precision") return r.precision;
  if (name == "recall") return r.recall;
  if (name == "f1") return r.f1;
  if (name == "location_accuracy") return r.location_accuracy;
  if (name == "attribute_accuracy") return r.attribute_accuracy;
  if (name == "fully_consistent_accuracy") return r.fully_consistent_accuracy;
  if (name == "or_rate") return r.or_rate;
  if (name == "fmor_rate") return r.fmor_rate;
  throw Error(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(name) + "'");
}

EntityCore entity_core(const MatchResult& m) {
  const double tp = static_cast<double>(m.hit_count());
  const double fn = static_cast<double>(m.judgments.size()) - tp;
  const double fp = static_cast<double>(m.fp_count());
  EntityCore e;
  e.precision = tp / (tp + fp + kEps);
  e.recall = tp / (tp + fn + kEps);
  e.f1 = 2.0 * e.precision * e.recall / (e.precision + e.recall + kEps);
  return e;
}

ClinicalFidelity clinical_fidelity(const MatchResult& m) {
  double hits = 0.0, loc = 0.0, attr = 0.0, both = 0.0;
  for (const auto& j : m.judgments) {
    if (!j.hit) continue;
    hits += 1.0;
    loc += j.location_match ? 1.0 : 0.0;
    attr += j.attribute_match ? 1.0 : 0.0;
    both += (j.location_match && j.attribute_match) ? 1.0 : 0.0;
  }
  return {loc / (hits + kEps), attr / (hits + kEps), both / (hits + kEps)};
}

OrganCoverage organ_coverage(const MatchResult& m, const ReportDecomposition& gt) {
  if (m.judgments.size() != gt.size()) {
    throw Error(ErrorCode::kLengthMismatch, "judgments do not align with ground-truth units");
  }
  struct Tally {
    double total = 0.0, hits = 0.0, full = 0.0;
  };
  std::map<Organ, Tally> per_organ;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    auto& t = per_organ[gt[i].organ];
    const auto& j = m.judgments[i];
    t.total += 1.0;
    t.hits += j.hit ? 1.0 : 0.0;
    t.full += (j.hit && j.location_match && j.attribute_match) ? 1.0 : 0.0;
  }
  double or_sum = 0.0, fmor_sum = 0.0;
  for (const auto& [organ, t] : per_organ) {
    or_sum += t.hits / (t.total + kEps);
    fmor_sum += t.full / (t.total + kEps);
  }
  const double organs = static_cast<double>(per_organ.size());
  return {or_sum / (organs + kEps), fmor_sum / (organs + kEps)};
}

MetricReport evaluate(const MatchResult& m, const ReportDecomposition& gt) {
  const auto e = entity_core(m);
  const auto f = clinical_fidelity(m);
  const auto o = organ_coverage(m, gt);
  MetricReport r;
  r.precision = e.precision;
  r.recall = e.recall;
  r.f1 = e.f1;
  r.location_accuracy = f.location_accuracy;
  r.attribute_accuracy = f.attribute_accuracy;
  r.fully_consistent_accuracy = f.fully_consistent_accuracy;
  r.or_rate = o.or_rate;
  r.fmor_rate = o.fmor_rate;
  r.hit_count = m.hit_count();
  r.fp_count = m.fp_count();
  r.gt_count = gt.size();
  return r;
}

MetricReport aggregate(const std::vector<MetricReport>& per_case) {
  if (per_case.empty()) throw Error(ErrorCode::kEmptyCorpus, "cannot aggregate an empty corpus");
  MetricReport out;
  for (const auto& r : per_case) {
    out.precision += r.precision;
    out.recall += r.recall;
    out.f1 += r.f1;
    out.location_accuracy += r.location_accuracy;
    out.attribute_accuracy += r.attribute_accuracy;
    out.fully_consistent_accuracy += r.fully_consistent_accuracy;
    out.or_rate += r.or_rate;
    out.fmor_rate += r.fmor_rate;
    out.hit_count += r.hit_count;
    out.fp_count += r.fp_count;
    out.gt_count += r.gt_count;
  }
  const double n = static_cast<double>(per_case.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  out.location_accuracy /= n;
  out.attribute_accuracy /= n;
  out.fully_consistent_accuracy /= n;
  out.or_rate /= n;
  out.fmor_rate /= n;
  return out;
}

MetricReport aggregate(const std::vector<EvaluatedCase>& cases, Averaging mode) {
  if (cases.empty()) throw Error(ErrorCode::kEmptyCorpus, "cannot aggregate an empty corpus");
  if (mode == Averaging::kMacro) {
    std::vector<MetricReport> reports;
    reports.reserve(cases.size());
    for (const auto& c : cases) reports.push_back(evaluate(c.match, c.gt));
    return aggregate(reports);
  }
  MatchResult pooled;
  std::vector<AbnormalityUnit> units;
  for (const auto& c : cases) {
    pooled.judgments.insert(pooled.judgments.end(), c.match.judgments.begin(), c.match.judgments.end());
    pooled.false_positives.insert(pooled.false_positives.end(), c.match.false_positives.begin(),
                                  c.match.false_positives.end());
    pooled.pred_count += c.match.pred_count;
    units.insert(units.end(), c.gt.units().begin(), c.gt.units().end());
  }
  return evaluate(pooled, ReportDecomposition(std::move(units)));
}

Json report_to_json(const MetricReport& r) {
  Json j = Json::object();
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["location_accuracy"] = r.location_accuracy;
  j["attribute_accuracy"] = r.attribute_accuracy;
  j["fully_consistent_accuracy"] = r.fully_consistent_accuracy;
  j["or_rate"] = r.or_rate;
  j["fmor_rate"] = r.fmor_rate;
  j["hit_count"] = r.hit_count;
  j["fp_count"] = r.fp_count;
  j["gt_count"] = r.gt_count;
  return j;
}

MetricReport report_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  require_object(j, path);
  reject_unknown_keys(j,
                      {"precision", "recall", "f1", "location_accuracy", "attribute_accuracy",
                       "fully_consistent_accuracy", "or_rate", "fmor_rate", "hit_count", "fp_count",
                       "gt_count"},
                      path);
  MetricReport r;
  r.precision = require_number(j, "precision", path);
  r.recall = require_number(j, "recall", path);
  r.f1 = require_number(j, "f1", path);
  r.location_accuracy = require_number(j, "location_accuracy", path);
  r.attribute_accuracy = require_number(j, "attribute_accuracy", path);
  r.fully_consistent_accuracy = require_number(j, "fully_consistent_accuracy", path);
  r.or_rate = require_number(j, "or_rate", path);
  r.fmor_rate = require_number(j, "fmor_rate", path);
  r.hit_count = static_cast<std::size_t>(require_number(j, "hit_count", path));
  r.fp_count = static_cast<std::size_t>(require_number(j, "fp_count", path));
  r.gt_count = static_cast<std::size_t>(require_number(j, "gt_count", path));
  return r;
}

std::string csv_header() {
  std::string h = "case_id";
  for (const auto& n : metric_score_names()) h += "," + n;
  h += ",hit_count,fp_count,gt_count";
  return h;
}

std::string csv_row(const std::string& case_id, const MetricReport& r) {
  std::string row = case_id;
  for (const auto& n : metric_score_names()) row += "," + format_score(metric_score(r, n));
  row += "," + std::to_string(r.hit_count) + "," + std::to_string(r.fp_count) + "," +
         std::to_string(r.gt_count);
  return row;
}

}  // namespace cabs_eval
