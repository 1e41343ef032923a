#include "cabs/divergence.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "cabs/lexicon.hpp"
#include "cabs/matching.hpp"
#include "cabs/metrics.hpp"

namespace cabs_eval::divergence {

namespace {

constexpr std::array<std::string_view, 5> kEditLabels = {"delete", "substitute", "flip_laterality",
                                                         "replace_attribute", "inject"};

bool allowed(const PerturbOptions& o, EditKind k) {
  return std::find(o.allowed.begin(), o.allowed.end(), k) != o.allowed.end();
}

bool is_laterality(std::string_view w) { return w == "left" || w == "right" || w == "bilateral"; }

// Rewrites laterality words in place, keeping all other bytes. bilateral
// becomes `unilateral_side`, left and right swap.
std::string flip_laterality(const std::string& location, const std::string& unilateral_side) {
  std::string out;
  std::size_t i = 0;
  while (i < location.size()) {
    if (!std::isalpha(static_cast<unsigned char>(location[i]))) {
      out.push_back(location[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < location.size() && std::isalpha(static_cast<unsigned char>(location[j]))) ++j;
    const std::string word = location.substr(i, j - i);
    const std::string lw = to_lower_ascii(word);
    std::string repl = word;
    if (lw == "left") repl = "right";
    else if (lw == "right") repl = "left";
    else if (lw == "bilateral") repl = unilateral_side;
    if (repl != word && std::isupper(static_cast<unsigned char>(word[0]))) {
      repl[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(repl[0])));
    }
    out += repl;
    i = j;
  }
  return out;
}

bool has_laterality(const std::string& location) {
  for (const auto& w : word_tokens(location)) {
    if (is_laterality(w)) return true;
  }
  return false;
}

bool unit_valid(const AbnormalityUnit& u) {
  try {
    validate_unit(u);
    return true;
  } catch (const Error&) {
    return false;
  }
}

AbnormalityUnit finalize(AbnormalityUnit u) {
  u.evidence = render_sentence(u);
  return u;
}

class DistractorPool {
 public:
  DistractorPool(const ReportDecomposition& gt, const PerturbOptions& options, SeededRng& rng) {
    const auto& lex = Lexicon::builtin();
    std::vector<std::string> names = options.distractors;
    if (names.empty()) {
      for (const auto& e : lex.entries()) names.push_back(e.name);
    }
    std::set<std::string> used;
    for (const auto& u : gt.units()) used.insert(lex.canonical_key(u.name));
    for (auto& n : names) {
      const auto key = lex.canonical_key(n);
      if (trim(n).empty() || !used.insert(key).second) continue;
      names_.push_back(trim(n));
    }
    rng.shuffle(names_);
  }

  // First remaining name that yields a valid unit when placed in `base`.
  std::optional<AbnormalityUnit> take(const AbnormalityUnit& base) {
    for (auto it = names_.begin(); it != names_.end(); ++it) {
      AbnormalityUnit u = base;
      u.name = *it;
      if (unit_valid(finalize(u))) {
        names_.erase(it);
        return finalize(u);
      }
    }
    return std::nullopt;
  }

  bool empty() const { return names_.empty(); }

 private:
  std::vector<std::string> names_;
};

std::optional<AbnormalityUnit> replace_attribute(const AbnormalityUnit& u, SeededRng& rng) {
  auto pool = Lexicon::builtin().attributes();
  rng.shuffle(pool);
  for (const auto& a : pool) {
    if (attributes_match(u.attributes, a)) continue;
    AbnormalityUnit v = u;
    v.attributes = a;
    if (unit_valid(finalize(v))) return finalize(v);
  }
  return std::nullopt;
}

std::optional<AbnormalityUnit> make_injection(DistractorPool& pool, SeededRng& rng) {
  // Name first with an empty location, then try to add one of its organ's
  // locations; the name test cannot fail on an empty location.
  AbnormalityUnit base;
  base.name = "x";
  auto u = pool.take(base);
  if (!u) return std::nullopt;
  const auto& lex = Lexicon::builtin();
  if (const auto* e = lex.lookup(u->name)) u->organ = e->organ;
  const auto& locs = lex.locations(u->organ);
  if (!locs.empty()) {
    AbnormalityUnit v = *u;
    v.location = locs[rng.index(locs.size())];
    if (unit_valid(finalize(v))) return finalize(v);
  }
  return finalize(*u);
}

}  // namespace

std::string_view to_string(EditKind kind) { return kEditLabels[static_cast<std::size_t>(kind)]; }

std::optional<EditKind> edit_kind_from_label(std::string_view label) {
  for (std::size_t i = 0; i < kEditLabels.size(); ++i) {
    if (kEditLabels[i] == label) return static_cast<EditKind>(i);
  }
  return std::nullopt;
}

std::string render_sentence(const AbnormalityUnit& unit) {
  std::string body;
  if (!unit.attributes.empty()) body = unit.attributes + " ";
  body += unit.name + " is noted.";
  if (!unit.location.empty()) return "In the " + unit.location + ", " + body;
  body[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(body[0])));
  return body;
}

std::string render_report(const ReportDecomposition& d) {
  std::string out;
  for (const auto& u : d.units()) {
    if (!out.empty()) out.push_back(' ');
    out += render_sentence(u);
  }
  return out;
}

std::vector<Edit> plan_edits(const ReportDecomposition& gt, int max_k, std::uint64_t seed,
                             const PerturbOptions& options) {
  if (max_k < 0) throw Error(ErrorCode::kInvalidArgument, "max_k must be >= 0");
  SeededRng rng(seed);
  DistractorPool pool(gt, options, rng);

  std::vector<std::size_t> order(gt.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  std::vector<Edit> unit_edits;
  for (std::size_t idx : order) {
    if (static_cast<int>(unit_edits.size()) == max_k) break;
    const AbnormalityUnit& u = gt[idx];
    std::vector<Edit> candidates;
    if (allowed(options, EditKind::kDelete)) candidates.push_back({EditKind::kDelete, idx, {}});
    if (allowed(options, EditKind::kSubstitute) && !pool.empty()) {
      candidates.push_back({EditKind::kSubstitute, idx, {}});
    }
    if (allowed(options, EditKind::kFlipLaterality) && has_laterality(u.location)) {
      candidates.push_back({EditKind::kFlipLaterality, idx, {}});
    }
    if (allowed(options, EditKind::kReplaceAttribute)) {
      candidates.push_back({EditKind::kReplaceAttribute, idx, {}});
    }
    // Draw a kind; fall through to the others if it cannot be realized.
    rng.shuffle(candidates);
    for (auto& c : candidates) {
      std::optional<AbnormalityUnit> repl;
      switch (c.kind) {
        case EditKind::kDelete: repl = u; break;
        case EditKind::kSubstitute: repl = pool.take(u); break;
        case EditKind::kFlipLaterality: {
          AbnormalityUnit v = u;
          v.location = flip_laterality(u.location, rng.index(2) == 0 ? "left" : "right");
          if (unit_valid(finalize(v))) repl = finalize(v);
          break;
        }
        case EditKind::kReplaceAttribute: repl = replace_attribute(u, rng); break;
        case EditKind::kInject: break;
      }
      if (repl) {
        c.replacement = *repl;
        unit_edits.push_back(c);
        break;
      }
    }
  }

  std::vector<Edit> injections;
  if (allowed(options, EditKind::kInject)) {
    while (static_cast<int>(unit_edits.size() + injections.size()) < max_k) {
      auto u = make_injection(pool, rng);
      if (!u) break;
      injections.push_back({EditKind::kInject, static_cast<std::size_t>(rng.next()), *u});
    }
  }

  // Injections go before the final unit edit so at least one matched unit
  // survives while false positives accumulate.
  std::vector<Edit> plan;
  if (unit_edits.empty()) return injections;
  plan.insert(plan.end(), unit_edits.begin(), unit_edits.end() - 1);
  plan.insert(plan.end(), injections.begin(), injections.end());
  plan.push_back(unit_edits.back());
  return plan;
}

ReportDecomposition apply_edits(const ReportDecomposition& gt, const std::vector<Edit>& plan, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > plan.size()) {
    throw Error(ErrorCode::kInsufficientUnits, "schedule has " + std::to_string(plan.size()) +
                                                   " edits, " + std::to_string(k) + " requested");
  }
  // Each entry remembers its ground-truth index (npos for injections).
  constexpr std::size_t kInjected = static_cast<std::size_t>(-1);
  std::vector<std::pair<std::size_t, AbnormalityUnit>> cur;
  for (std::size_t i = 0; i < gt.size(); ++i) cur.emplace_back(i, gt[i]);
  for (int e = 0; e < k; ++e) {
    const Edit& edit = plan[static_cast<std::size_t>(e)];
    if (edit.kind == EditKind::kInject) {
      const auto pos = static_cast<std::ptrdiff_t>(edit.target % (cur.size() + 1));
      cur.insert(cur.begin() + pos, {kInjected, edit.replacement});
      continue;
    }
    auto it = std::find_if(cur.begin(), cur.end(), [&](const auto& p) { return p.first == edit.target; });
    if (it == cur.end()) throw Error(ErrorCode::kInvalidArgument, "edit targets a missing unit");
    if (edit.kind == EditKind::kDelete) {
      cur.erase(it);
    } else {
      it->second = edit.replacement;
    }
  }
  std::vector<AbnormalityUnit> units;
  units.reserve(cur.size());
  for (auto& p : cur) units.push_back(std::move(p.second));
  return ReportDecomposition(std::move(units));
}

Variant perturb(const ReportDecomposition& gt, int k, std::uint64_t seed, const PerturbOptions& options) {
  if (k < 0 || k > kMaxModifications) throw Error(ErrorCode::kInvalidArgument, "k must lie in [0, 5]");
  if (k > 0 && gt.empty()) {
    throw Error(ErrorCode::kInsufficientUnits, "cannot modify a report without abnormalities");
  }
  Variant v;
  v.modification_count = k;
  v.seed_index = static_cast<std::uint64_t>(k);
  if (k == 0) {
    v.units = gt;
  } else {
    auto plan = plan_edits(gt, kMaxModifications, seed, options);
    v.units = apply_edits(gt, plan, k);
    v.edits.assign(plan.begin(), plan.begin() + k);
  }
  v.rendered_text = render_report(v.units);
  return v;
}

std::vector<int> compute_text_ranks(const std::vector<Variant>& variants) {
  std::vector<std::size_t> idx(variants.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = variants[a];
    const auto& y = variants[b];
    if (x.modification_count != y.modification_count) return x.modification_count < y.modification_count;
    return x.seed_index < y.seed_index;
  });
  std::vector<int> ranks(variants.size());
  for (std::size_t r = 0; r < idx.size(); ++r) ranks[idx[r]] = static_cast<int>(r + 1);
  return ranks;
}

VariantPool build_pool(std::string case_id, const ReportDecomposition& gt, std::uint64_t seed,
                       const PerturbOptions& options, int max_k) {
  if (max_k < 1 || max_k > kMaxModifications) {
    throw Error(ErrorCode::kInvalidArgument, "max_k must lie in [1, 5]");
  }
  if (gt.empty()) throw Error(ErrorCode::kInsufficientUnits, "cannot perturb a report without abnormalities");
  VariantPool pool;
  pool.case_id = std::move(case_id);
  pool.base = gt;
  pool.base_text = render_report(gt);
  const auto plan = plan_edits(gt, kMaxModifications, seed, options);
  for (int k = 0; k <= max_k; ++k) {
    Variant v;
    v.modification_count = k;
    v.seed_index = static_cast<std::uint64_t>(k);
    v.units = apply_edits(gt, plan, k);
    v.edits.assign(plan.begin(), plan.begin() + k);
    v.rendered_text = render_report(v.units);
    pool.variants.push_back(std::move(v));
  }
  pool.text_ranks = compute_text_ranks(pool.variants);
  return pool;
}

namespace {

Json edit_to_json(const Edit& e) {
  Json j = Json::object();
  j["kind"] = to_string(e.kind);
  j["target"] = e.target;
  if (e.kind != EditKind::kDelete) j["unit"] = unit_to_json(e.replacement);
  return j;
}

Edit edit_from_json(const Json& j, const std::string& path) {
  schema::require_object(j, path);
  schema::reject_unknown_keys(j, {"kind", "target", "unit"}, path);
  Edit e;
  const auto label = schema::require_string(j, "kind", path);
  auto kind = edit_kind_from_label(label);
  if (!kind) throw Error(ErrorCode::kSchemaViolation, "unknown edit kind '" + label + "'", schema::join_path(path, "kind"));
  e.kind = *kind;
  const Json& t = schema::require_field(j, "target", path);
  if (!t.is_number_unsigned()) {
    throw Error(ErrorCode::kSchemaViolation, "expected unsigned integer", schema::join_path(path, "target"));
  }
  e.target = t.get<std::size_t>();
  if (e.kind != EditKind::kDelete) {
    e.replacement = unit_from_json(schema::require_field(j, "unit", path), schema::join_path(path, "unit"));
  }
  return e;
}

}  // namespace

Json pool_to_json(const VariantPool& pool) {
  Json j = Json::object();
  j["case_id"] = pool.case_id;
  j["base"] = decomposition_to_json(pool.base);
  j["base_text"] = pool.base_text;
  Json vs = Json::array();
  for (const auto& v : pool.variants) {
    Json jv = Json::object();
    jv["modification_count"] = v.modification_count;
    jv["seed_index"] = v.seed_index;
    jv["units"] = decomposition_to_json(v.units);
    jv["rendered_text"] = v.rendered_text;
    Json edits = Json::array();
    for (const auto& e : v.edits) edits.push_back(edit_to_json(e));
    jv["edits"] = std::move(edits);
    vs.push_back(std::move(jv));
  }
  j["variants"] = std::move(vs);
  j["text_ranks"] = pool.text_ranks;
  return j;
}

VariantPool pool_from_json(const Json& j) {
  schema::require_object(j, "");
  schema::reject_unknown_keys(j, {"case_id", "base", "base_text", "variants", "text_ranks"}, "");
  VariantPool pool;
  pool.case_id = schema::require_string(j, "case_id", "");
  pool.base = decomposition_from_json(schema::require_field(j, "base", ""), "base");
  pool.base_text = schema::require_string(j, "base_text", "");
  const Json& vs = schema::require_array(j, "variants", "");
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const std::string path = schema::index_path("variants", i);
    const Json& jv = vs[i];
    schema::require_object(jv, path);
    schema::reject_unknown_keys(jv, {"modification_count", "seed_index", "units", "rendered_text", "edits"}, path);
    Variant v;
    const Json& k = schema::require_field(jv, "modification_count", path);
    if (!k.is_number_integer() || k.get<int>() < 0 || k.get<int>() > kMaxModifications) {
      throw Error(ErrorCode::kSchemaViolation, "modification_count must be an integer in [0, 5]",
                  schema::join_path(path, "modification_count"));
    }
    v.modification_count = k.get<int>();
    const Json& s = schema::require_field(jv, "seed_index", path);
    if (!s.is_number_unsigned()) {
      throw Error(ErrorCode::kSchemaViolation, "expected unsigned integer", schema::join_path(path, "seed_index"));
    }
    v.seed_index = s.get<std::uint64_t>();
    v.units = decomposition_from_json(schema::require_field(jv, "units", path), schema::join_path(path, "units"));
    v.rendered_text = schema::require_string(jv, "rendered_text", path);
    if (jv.contains("edits")) {
      const Json& es = schema::require_array(jv, "edits", path);
      for (std::size_t e = 0; e < es.size(); ++e) {
        v.edits.push_back(edit_from_json(es[e], schema::index_path(schema::join_path(path, "edits"), e)));
      }
    }
    pool.variants.push_back(std::move(v));
  }
  const auto expected = compute_text_ranks(pool.variants);
  if (j.contains("text_ranks")) {
    const Json& tr = schema::require_array(j, "text_ranks", "");
    std::vector<int> ranks;
    for (const auto& r : tr) {
      if (!r.is_number_integer()) throw Error(ErrorCode::kSchemaViolation, "expected integer", "text_ranks");
      ranks.push_back(r.get<int>());
    }
    if (ranks != expected) {
      throw Error(ErrorCode::kSchemaViolation, "text_ranks disagree with modification counts", "text_ranks");
    }
  }
  pool.text_ranks = expected;
  const auto zero = std::count_if(pool.variants.begin(), pool.variants.end(),
                                  [](const Variant& v) { return v.modification_count == 0; });
  if (zero != 1) throw Error(ErrorCode::kSchemaViolation, "pool needs exactly one unmodified variant", "variants");
  for (const auto& v : pool.variants) {
    if (v.modification_count == 0 && !(v.units == pool.base)) {
      throw Error(ErrorCode::kSchemaViolation, "unmodified variant differs from base", "variants");
    }
  }
  return pool;
}

ConcordanceResult concordance(const std::vector<int>& text_ranks, const std::vector<double>& scores) {
  if (text_ranks.size() != scores.size() || text_ranks.size() < 2) {
    throw Error(ErrorCode::kLengthMismatch, "concordance needs equal-length inputs with n >= 2");
  }
  ConcordanceResult r;
  r.n = scores.size();
  for (std::size_t i = 0; i < r.n; ++i) {
    for (std::size_t j = i + 1; j < r.n; ++j) {
      if (text_ranks[i] == text_ranks[j] || scores[i] == scores[j]) {
        r.concordant_pairs += 0.5;
      } else if ((text_ranks[i] < text_ranks[j]) == (scores[i] > scores[j])) {
        r.concordant_pairs += 1.0;
      }
    }
  }
  const double pairs = static_cast<double>(r.n) * static_cast<double>(r.n - 1) / 2.0;
  r.phi = r.concordant_pairs / pairs;
  return r;
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(ErrorCode::kLengthMismatch, "spearman needs equal-length inputs with n >= 2");
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::kZeroVariance, "constant input has no rank variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const surface::ScoreTable& table) {
  CorrelationMatrix m;
  m.metrics = table.metrics();
  const auto& models = table.cases();
  std::vector<std::vector<double>> cols;
  for (const auto& metric : m.metrics) {
    std::vector<double> col;
    for (const auto& model : models) {
      auto v = table.get(model, metric);
      if (!v) throw Error(ErrorCode::kMissingCell, "missing score for (" + model + ", " + metric + ")");
      col.push_back(*v);
    }
    cols.push_back(std::move(col));
  }
  const std::size_t k = cols.size();
  m.rho.assign(k, std::vector<double>(k, 1.0));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      m.rho[a][b] = m.rho[b][a] = spearman(cols[a], cols[b]);
    }
  }
  return m;
}

std::string matrix_to_csv(const CorrelationMatrix& m) {
  std::ostringstream out;
  out << "metric";
  for (const auto& name : m.metrics) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t a = 0; a < m.metrics.size(); ++a) {
    out << m.metrics[a];
    for (std::size_t b = 0; b < m.metrics.size(); ++b) {
      std::snprintf(buf, sizeof buf, "%.17g", m.rho[a][b]);
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string variant_id(const std::string& case_id, const Variant& v) {
  return case_id + ":k" + std::to_string(v.modification_count) + ":s" + std::to_string(v.seed_index);
}

PoolScores score_pool(const VariantPool& pool, const surface::ScoreTable* external) {
  PoolScores s;
  s.case_id = pool.case_id;
  s.text_ranks = pool.text_ranks;
  std::vector<double> f1, bleu, rouge;
  const auto ref_tokens = surface::tokenize(pool.base_text);
  for (const auto& v : pool.variants) {
    const auto m = lexical_match(pool.base.units(), v.units.units());
    f1.push_back(entity_core(m).f1);
    const auto cand = surface::tokenize(v.rendered_text);
    bleu.push_back(surface::bleu(cand, ref_tokens));
    rouge.push_back(surface::rouge_l(cand, ref_tokens));
  }
  s.metrics.emplace_back("cabs_f1", std::move(f1));
  s.metrics.emplace_back("bleu", std::move(bleu));
  s.metrics.emplace_back("rouge_l", std::move(rouge));
  if (external != nullptr) {
    for (const auto& metric : external->metrics()) {
      std::vector<double> col;
      for (const auto& v : pool.variants) {
        const auto id = variant_id(pool.case_id, v);
        auto val = external->get(id, metric);
        if (!val) throw Error(ErrorCode::kMissingCell, "missing score for (" + id + ", " + metric + ")");
        col.push_back(*val);
      }
      s.metrics.emplace_back(metric, std::move(col));
    }
  }
  return s;
}

DivergenceReport analyze_pools(const std::vector<PoolScores>& pools) {
  if (pools.empty()) throw Error(ErrorCode::kEmptyCorpus, "no pools to analyze");
  DivergenceReport r;
  std::map<std::string, double> sums;
  for (const auto& p : pools) {
    std::map<std::string, ConcordanceResult> per;
    for (const auto& [metric, scores] : p.metrics) {
      if (std::find(r.metrics.begin(), r.metrics.end(), metric) == r.metrics.end()) r.metrics.push_back(metric);
      per[metric] = concordance(p.text_ranks, scores);
      sums[metric] += per[metric].phi;
    }
    r.per_pool.emplace_back(p.case_id, std::move(per));
  }
  for (const auto& metric : r.metrics) {
    for (const auto& p : r.per_pool) {
      if (!p.second.count(metric)) {
        throw Error(ErrorCode::kMissingCell, "pool " + p.first + " lacks metric " + metric);
      }
    }
    r.mean_phi[metric] = sums[metric] / static_cast<double>(pools.size());
  }
  return r;
}

Json report_to_json(const DivergenceReport& r) {
  Json j = Json::object();
  j["metrics"] = r.metrics;
  Json means = Json::object();
  for (const auto& m : r.metrics) means[m] = r.mean_phi.at(m);
  j["mean_phi"] = std::move(means);
  Json pools = Json::array();
  for (const auto& [case_id, per] : r.per_pool) {
    Json jp = Json::object();
    jp["case_id"] = case_id;
    Json phi = Json::object();
    for (const auto& m : r.metrics) {
      const auto& c = per.at(m);
      phi[m] = {{"phi", c.phi}, {"concordant_pairs", c.concordant_pairs}, {"n", c.n}};
    }
    jp["phi"] = std::move(phi);
    pools.push_back(std::move(jp));
  }
  j["pools"] = std::move(pools);
  return j;
}

ReportDecomposition synthesize_decomposition(SeededRng& rng, std::size_t min_units, std::size_t max_units) {
  if (min_units > max_units) throw Error(ErrorCode::kInvalidArgument, "min_units > max_units");
  const auto& lex = Lexicon::builtin();
  const std::size_t k = min_units + rng.index(max_units - min_units + 1);
  std::vector<const LexiconEntry*> entries;
  for (const auto& e : lex.entries()) entries.push_back(&e);
  rng.shuffle(entries);
  std::vector<AbnormalityUnit> units;
  for (const auto* e : entries) {
    if (units.size() == k) break;
    AbnormalityUnit u;
    u.name = e->name;
    u.organ = e->organ;
    const auto& locs = lex.locations(e->organ);
    if (!locs.empty() && rng.unit() < 0.8) u.location = locs[rng.index(locs.size())];
    const auto& attrs = lex.attributes();
    if (!attrs.empty() && rng.unit() < 0.7) u.attributes = attrs[rng.index(attrs.size())];
    u.certainty = rng.unit() < 0.8 ? Certainty::kDefinite : Certainty::kPossible;
    if (!unit_valid(finalize(u))) u.attributes.clear();
    if (!unit_valid(finalize(u))) u.location.clear();
    units.push_back(finalize(u));
  }
  if (units.size() < k) throw Error(ErrorCode::kInvalidArgument, "lexicon too small for requested unit count");
  return ReportDecomposition(std::move(units));
}

std::vector<ReportDecomposition> synthesize_corpus(std::size_t n, std::uint64_t seed, std::size_t min_units,
                                                   std::size_t max_units) {
  std::vector<ReportDecomposition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SeededRng rng(derive_seed(seed, i));
    out.push_back(synthesize_decomposition(rng, min_units, max_units));
  }
  return out;
}

}  // namespace cabs_eval::divergence
