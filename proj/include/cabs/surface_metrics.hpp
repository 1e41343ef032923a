#pragma once

// Surface-similarity metrics used as the baseline in the divergence
// analyses, plus a container for externally computed scores.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cabs/core.hpp"

namespace cabs_eval::surface {

/// Lowercase; each punctuation byte becomes its own token; whitespace splits.
std::vector<std::string> tokenize(std::string_view text);

/// Sentence BLEU: geometric mean of clipped n-gram precisions (each floored
/// at 1e-9) times the brevity penalty. Throws kEmptyReference, and
/// kInvalidArgument when max_n is outside [1, 4].
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            int max_n = 4);
double bleu(std::string_view candidate, std::string_view reference, int max_n = 4);

struct RougeL {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// LCS-based F-measure, (1 + b^2) P R / (R + b^2 P) with b = beta.
/// Throws kEmptyReference.
RougeL rouge_l_detail(const std::vector<std::string>& candidate,
                      const std::vector<std::string>& reference, double beta = 1.2);
double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
               double beta = 1.2);
double rouge_l(std::string_view candidate, std::string_view reference, double beta = 1.2);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Scores keyed by (case_id, metric). Insertion order is kept for cases and
/// metrics so downstream matrices have a stable layout.
class ScoreTable {
 public:
  /// Throws kDuplicateKey or kBadNumber (non-finite score).
  void add(const std::string& case_id, const std::string& metric, double score);

  std::optional<double> get(const std::string& case_id, const std::string& metric) const;
  std::size_t size() const { return scores_.size(); }
  const std::vector<std::string>& cases() const { return cases_; }
  const std::vector<std::string>& metrics() const { return metrics_; }

 private:
  std::map<std::pair<std::string, std::string>, double> scores_;
  std::vector<std::string> cases_;
  std::vector<std::string> metrics_;
};

/// CSV with header `case_id,metric,score`. Throws kDuplicateKey,
/// kBadNumber, kSchemaViolation (header or column count, with line path).
ScoreTable parse_score_csv(std::string_view text);
ScoreTable load_external_scores(const std::filesystem::path& path);

}  // namespace cabs_eval::surface
