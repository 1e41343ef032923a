#include "cabs/surface_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cabs/text.hpp"

namespace cabs_eval::surface {

namespace {

constexpr double kPrecisionFloor = 1e-9;

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))]++;
  }
  return counts;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (std::isalnum(u) || u >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
      out.emplace_back(1, c);
    }
  }
  flush();
  return out;
}

double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            int max_n) {
  if (max_n < 1 || max_n > 4) throw Error(ErrorCode::kInvalidArgument, "max_n must lie in [1, 4]");
  if (reference.empty()) throw Error(ErrorCode::kEmptyReference, "BLEU reference is empty");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand = ngrams(candidate, static_cast<std::size_t>(n));
    const auto ref = ngrams(reference, static_cast<std::size_t>(n));
    int matched = 0;
    int total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      if (auto it = ref.find(gram); it != ref.end()) matched += std::min(count, it->second);
    }
    const double p = total > 0 ? static_cast<double>(matched) / total : 0.0;
    log_sum += std::log(std::max(p, kPrecisionFloor));
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / max_n);
}

double bleu(std::string_view candidate, std::string_view reference, int max_n) {
  return bleu(tokenize(candidate), tokenize(reference), max_n);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeL rouge_l_detail(const std::vector<std::string>& candidate,
                      const std::vector<std::string>& reference, double beta) {
  if (reference.empty()) throw Error(ErrorCode::kEmptyReference, "ROUGE-L reference is empty");
  RougeL r;
  if (candidate.empty()) return r;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return r;
  r.precision = lcs / static_cast<double>(candidate.size());
  r.recall = lcs / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  r.f = (1.0 + b2) * r.precision * r.recall / (r.recall + b2 * r.precision);
  return r;
}

double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
               double beta) {
  return rouge_l_detail(candidate, reference, beta).f;
}

double rouge_l(std::string_view candidate, std::string_view reference, double beta) {
  return rouge_l(tokenize(candidate), tokenize(reference), beta);
}

void ScoreTable::add(const std::string& case_id, const std::string& metric, double score) {
  if (!std::isfinite(score)) {
    throw Error(ErrorCode::kBadNumber, "score for (" + case_id + ", " + metric + ") is not finite");
  }
  auto [it, inserted] = scores_.emplace(std::make_pair(case_id, metric), score);
  if (!inserted) {
    throw Error(ErrorCode::kDuplicateKey, "duplicate score for (" + case_id + ", " + metric + ")");
  }
  if (std::find(cases_.begin(), cases_.end(), case_id) == cases_.end()) cases_.push_back(case_id);
  if (std::find(metrics_.begin(), metrics_.end(), metric) == metrics_.end()) metrics_.push_back(metric);
}

std::optional<double> ScoreTable::get(const std::string& case_id, const std::string& metric) const {
  auto it = scores_.find({case_id, metric});
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

namespace {

// Minimal RFC 4180 field splitter (quoted fields, doubled quotes).
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

ScoreTable parse_score_csv(std::string_view text) {
  ScoreTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string path = "line " + std::to_string(line_no);
    auto fields = split_csv_line(line);
    if (!header_seen) {
      if (fields.size() != 3 || trim(fields[0]) != "case_id" || trim(fields[1]) != "metric" ||
          trim(fields[2]) != "score") {
        throw Error(ErrorCode::kSchemaViolation, "expected header case_id,metric,score", path);
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) throw Error(ErrorCode::kSchemaViolation, "expected 3 columns", path);
    const std::string value = trim(fields[2]);
    double score = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), score);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size() || !std::isfinite(score)) {
      throw Error(ErrorCode::kBadNumber, "bad score '" + value + "'", path);
    }
    try {
      table.add(trim(fields[0]), trim(fields[1]), score);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), path);
    }
  }
  if (!header_seen) throw Error(ErrorCode::kSchemaViolation, "missing header case_id,metric,score", "line 1");
  return table;
}

ScoreTable load_external_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_score_csv(ss.str());
}

}  // namespace cabs_eval::surface
