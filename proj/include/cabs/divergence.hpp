#pragma once

// Counterfactual perturbation pools, pairwise concordance between a
// clinical-priority ordering and metric orderings, and Spearman
// correlation matrices over metric suites.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cabs/core.hpp"
#include "cabs/surface_metrics.hpp"
#include "cabs/text.hpp"

namespace cabs_eval::divergence {

enum class EditKind { kDelete, kSubstitute, kFlipLaterality, kReplaceAttribute, kInject };

std::string_view to_string(EditKind kind);
std::optional<EditKind> edit_kind_from_label(std::string_view label);

inline const std::vector<EditKind> kAllEdits = {EditKind::kDelete, EditKind::kSubstitute,
                                                EditKind::kFlipLaterality, EditKind::kReplaceAttribute,
                                                EditKind::kInject};
/// Edits that each remove or replace a detected entity (or add a false one),
/// so every additional edit lowers entity-level F1.
inline const std::vector<EditKind> kEntityEdits = {EditKind::kDelete, EditKind::kSubstitute,
                                                   EditKind::kInject};

inline constexpr int kMaxModifications = 5;

struct PerturbOptions {
  std::vector<EditKind> allowed = kAllEdits;
  /// Candidate names for substitution/injection; empty means the built-in
  /// lexicon names. Names present in the ground truth are skipped.
  std::vector<std::string> distractors;
};

struct Edit {
  EditKind kind = EditKind::kDelete;
  std::size_t target = 0;    ///< ground-truth unit index, or insertion draw for kInject
  AbnormalityUnit replacement;  ///< edited or injected unit (unused for kDelete)
};

/// "In the {location}, {attributes} {name} is noted." with empty fields
/// omitted; one sentence per unit, space-joined in unit order.
std::string render_sentence(const AbnormalityUnit& unit);
std::string render_report(const ReportDecomposition& d);

/// Deterministic edit schedule of up to `max_k` edits for (gt, seed). Unit
/// edits touch distinct units; injections fill in once units run out and are
/// placed before the final unit edit, so prefixes of the schedule form a
/// nested sequence of increasingly modified reports. Returns fewer than
/// max_k edits when the units and allowed kinds cannot support more.
std::vector<Edit> plan_edits(const ReportDecomposition& gt, int max_k, std::uint64_t seed,
                             const PerturbOptions& options = {});

/// Applies the first k edits of a schedule. Throws kInsufficientUnits when
/// the schedule is shorter than k.
ReportDecomposition apply_edits(const ReportDecomposition& gt, const std::vector<Edit>& plan, int k);

struct Variant {
  int modification_count = 0;
  ReportDecomposition units;
  std::string rendered_text;
  std::uint64_t seed_index = 0;
  std::vector<Edit> edits;

  friend bool operator==(const Variant& a, const Variant& b) {
    return a.modification_count == b.modification_count && a.units == b.units &&
           a.rendered_text == b.rendered_text && a.seed_index == b.seed_index;
  }
};

/// k in [0, 5]; k = 0 returns gt unchanged. Deterministic in (gt, k, seed).
/// Throws kInvalidArgument for k outside [0, 5], kInsufficientUnits.
Variant perturb(const ReportDecomposition& gt, int k, std::uint64_t seed,
                const PerturbOptions& options = {});

struct VariantPool {
  std::string case_id;
  ReportDecomposition base;
  std::string base_text;
  std::vector<Variant> variants;
  std::vector<int> text_ranks;  ///< 1 = fewest modifications
};

/// Ranks by (modification_count, seed_index); a permutation of 1..n.
std::vector<int> compute_text_ranks(const std::vector<Variant>& variants);

/// One variant per k = 0..max_k, all from the same schedule.
VariantPool build_pool(std::string case_id, const ReportDecomposition& gt, std::uint64_t seed,
                       const PerturbOptions& options = {}, int max_k = kMaxModifications);

Json pool_to_json(const VariantPool& pool);
VariantPool pool_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Rank statistics

struct ConcordanceResult {
  double phi = 0.0;
  double concordant_pairs = 0.0;  ///< ties contribute 0.5
  std::size_t n = 0;
};

/// Fraction of pairs ordered the same way by text rank (lower is better)
/// and metric score (higher is better). Throws kLengthMismatch.
ConcordanceResult concordance(const std::vector<int>& text_ranks, const std::vector<double>& scores);

/// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(const std::vector<double>& xs);

/// Pearson correlation of average ranks. Throws kLengthMismatch (also for
/// n < 2) and kZeroVariance.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct CorrelationMatrix {
  std::vector<std::string> metrics;
  std::vector<std::vector<double>> rho;
};

/// Spearman matrix between metric columns, treating the table's case ids
/// as models. Throws kMissingCell.
CorrelationMatrix correlation_matrix(const surface::ScoreTable& table);
std::string matrix_to_csv(const CorrelationMatrix& m);

// ---------------------------------------------------------------------------
// Pool scoring

struct PoolScores {
  std::string case_id;
  std::vector<int> text_ranks;
  std::vector<std::pair<std::string, std::vector<double>>> metrics;
};

/// Variant id used to join external scores: "{case_id}:k{k}:s{seed_index}".
std::string variant_id(const std::string& case_id, const Variant& v);

/// Scores each variant against the base: cabs_f1 via lexical matching,
/// bleu and rouge_l on rendered text, plus every metric in `external`.
/// Throws kMissingCell when an external metric lacks a variant.
PoolScores score_pool(const VariantPool& pool, const surface::ScoreTable* external = nullptr);

struct DivergenceReport {
  std::vector<std::string> metrics;
  std::vector<std::pair<std::string, std::map<std::string, ConcordanceResult>>> per_pool;
  std::map<std::string, double> mean_phi;
};

DivergenceReport analyze_pools(const std::vector<PoolScores>& pools);
Json report_to_json(const DivergenceReport& r);

// ---------------------------------------------------------------------------
// Synthetic corpora

/// Random valid decomposition with distinct entity names drawn from the
/// built-in lexicon, K in [min_units, max_units].
ReportDecomposition synthesize_decomposition(SeededRng& rng, std::size_t min_units = 1,
                                             std::size_t max_units = 5);
std::vector<ReportDecomposition> synthesize_corpus(std::size_t n, std::uint64_t seed,
                                                   std::size_t min_units = 1, std::size_t max_units = 5);

}  // namespace cabs_eval::divergence
