#include "cabs/matching.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <set>

#include "cabs/lexicon.hpp"
#include "cabs/llm_client.hpp"
#include "cabs/text.hpp"

namespace cabs_eval {

// ---------------------------------------------------------------------------
// MatchResult

std::size_t MatchResult::hit_count() const {
  return static_cast<std::size_t>(
      std::count_if(judgments.begin(), judgments.end(), [](const UnitJudgment& j) { return j.hit; }));
}

bool clamp_judgments(MatchResult& m) {
  bool changed = false;
  for (auto& j : m.judgments) {
    if (!j.hit && (j.location_match || j.attribute_match)) {
      j.location_match = false;
      j.attribute_match = false;
      changed = true;
    }
  }
  return changed;
}

void validate_match(const MatchResult& m) {
  for (std::size_t i = 0; i < m.judgments.size(); ++i) {
    const auto& j = m.judgments[i];
    if (!j.hit && (j.location_match || j.attribute_match)) {
      throw Error(ErrorCode::kSchemaViolation, "sub-match set on a missed unit",
                  schema::index_path("abnormalities", i));
    }
  }
  if (m.fp_count() > m.pred_count) {
    throw Error(ErrorCode::kSchemaViolation, "more false positives than predicted units",
                "false_positive");
  }
}

Json match_to_json(const MatchResult& m) {
  Json j = Json::object();
  Json list = Json::array();
  for (const auto& u : m.judgments) {
    Json o = Json::object();
    o["name"] = u.name;
    o["hit"] = u.hit;
    o["location_match"] = u.location_match;
    o["attribute_match"] = u.attribute_match;
    list.push_back(std::move(o));
  }
  j["abnormalities"] = std::move(list);
  Json fps = Json::array();
  for (const auto& name : m.false_positives) {
    Json o = Json::object();
    o["name"] = name;
    fps.push_back(std::move(o));
  }
  j["false_positive"] = std::move(fps);
  return j;
}

DecodedMatch match_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  require_object(j, path);
  reject_unknown_keys(j, {"abnormalities", "false_positive"}, path);
  DecodedMatch out;
  const Json& list = require_array(j, "abnormalities", path);
  const std::string list_path = join_path(path, "abnormalities");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string p = index_path(list_path, i);
    require_object(list[i], p);
    reject_unknown_keys(list[i], {"name", "hit", "location_match", "attribute_match"}, p);
    UnitJudgment u;
    u.name = require_string(list[i], "name", p);
    u.hit = require_bool(list[i], "hit", p);
    u.location_match = require_bool(list[i], "location_match", p);
    u.attribute_match = require_bool(list[i], "attribute_match", p);
    out.result.judgments.push_back(std::move(u));
  }
  const Json& fps = require_array(j, "false_positive", path);
  const std::string fp_path = join_path(path, "false_positive");
  for (std::size_t i = 0; i < fps.size(); ++i) {
    const std::string p = index_path(fp_path, i);
    require_object(fps[i], p);
    reject_unknown_keys(fps[i], {"name"}, p);
    out.result.false_positives.push_back(require_string(fps[i], "name", p));
  }
  out.repaired = clamp_judgments(out.result);
  out.result.pred_count = out.result.hit_count() + out.result.fp_count();
  return out;
}

std::string serialize_match(const MatchResult& m) { return match_to_json(m).dump(); }

DecodedMatch parse_match(std::string_view text) {
  return match_from_json(schema::parse_json_text(text));
}

// ---------------------------------------------------------------------------
// Rule-based extraction

namespace {

struct Token {
  std::string lower;
  std::size_t begin = 0;  // byte offsets into the sentence
  std::size_t end = 0;
};

std::vector<Token> tokenize_sentence(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (std::isalnum(c) || c >= 0x80) {
      Token t;
      t.begin = i;
      while (i < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[i])) || static_cast<unsigned char>(s[i]) >= 0x80)) {
        t.lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
        ++i;
      }
      t.end = i;
      out.push_back(std::move(t));
    } else {
      ++i;
    }
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(std::move(t));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool at_end = i + 1 == text.size();
    const bool next_space = !at_end && std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (c == '\n' || c == ';') {
      flush();
    } else if ((c == '.' || c == '!' || c == '?') && (at_end || next_space)) {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

bool has_any_phrase(std::string_view normalized, std::initializer_list<std::string_view> cues) {
  return std::any_of(cues.begin(), cues.end(),
                     [&](std::string_view cue) { return contains_phrase(normalized, cue); });
}

bool is_negated(std::string_view normalized) {
  return has_any_phrase(normalized, {"no", "not seen", "negative for", "without"});
}

bool is_uncertain(std::string_view normalized) {
  return has_any_phrase(normalized,
                        {"possible", "possibly", "probable", "probably", "cannot exclude",
                         "cannot be excluded", "consider", "considered", "suspicious", "suspected",
                         "suspect", "likely", "may", "questionable", "suggestive of", "suggesting",
                         "query"});
}

struct Span {
  std::size_t first = 0;  // token index, inclusive
  std::size_t last = 0;   // exclusive
  bool contains(std::size_t i) const { return i >= first && i < last; }
  bool empty() const { return first >= last; }
};

bool is_location_cue(std::string_view t) {
  return t == "in" || t == "within" || t == "of" || t == "at" || t == "involving" || t == "along";
}

bool is_location_stop(std::string_view t) {
  static constexpr std::array<std::string_view, 20> kStops = {
      "with",      "is",         "are",        "was",      "were",     "which",    "measuring",
      "consider",  "suggesting", "suggestive", "likely",   "possibly", "compatible", "consistent",
      "noted",     "seen",       "showing",    "demonstrating", "and", "probably"};
  return std::find(kStops.begin(), kStops.end(), t) != kStops.end();
}

// Punctuation between two adjacent tokens ends a phrase.
bool punct_between(std::string_view sentence, const Token& a, const Token& b) {
  for (std::size_t i = a.end; i < b.begin; ++i) {
    const char c = sentence[i];
    if (c == ',' || c == ';' || c == ':' || c == '(' || c == ')') return true;
  }
  return false;
}

bool phrase_is_anatomical(const std::vector<Token>& toks, Span span) {
  const auto& lex = Lexicon::builtin();
  for (std::size_t i = span.first; i < span.last; ++i) {
    if (lex.is_anatomy_term(toks[i].lower)) return true;
    if (canonical_organ(toks[i].lower) != Organ::kOther) return true;
  }
  return false;
}

// Collects tokens after the cue at `cue` until a stop, punctuation, the
// mention, or six tokens.
std::optional<Span> phrase_after_cue(std::string_view sentence, const std::vector<Token>& toks,
                                     std::size_t cue, Span mention) {
  std::size_t i = cue + 1;
  while (i < toks.size() && (toks[i].lower == "the" || toks[i].lower == "both")) {
    if (punct_between(sentence, toks[i - 1], toks[i])) return std::nullopt;
    ++i;
  }
  if (i >= toks.size() || punct_between(sentence, toks[i - 1], toks[i])) return std::nullopt;
  Span s{i, i};
  while (s.last < toks.size() && s.last - s.first < 6) {
    const std::size_t k = s.last;
    if (mention.contains(k) || is_location_stop(toks[k].lower)) break;
    if (k > s.first && punct_between(sentence, toks[k - 1], toks[k])) break;
    ++s.last;
  }
  if (s.empty() || !phrase_is_anatomical(toks, s)) return std::nullopt;
  return s;
}

std::optional<Span> find_location(std::string_view sentence, const std::vector<Token>& toks, Span mention) {
  for (std::size_t i = mention.last; i < toks.size(); ++i) {
    if (is_location_cue(toks[i].lower)) {
      if (auto s = phrase_after_cue(sentence, toks, i, mention)) return s;
    }
  }
  for (std::size_t i = mention.first; i-- > 0;) {
    if (is_location_cue(toks[i].lower)) {
      if (auto s = phrase_after_cue(sentence, toks, i, mention)) return s;
    }
  }
  return std::nullopt;
}

// "small right pleural effusion": a bare side word just before the
// mention is the only location given.
std::optional<Span> laterality_before(const std::vector<Token>& toks, Span mention) {
  for (std::size_t back = 1; back <= 2 && back <= mention.first; ++back) {
    const auto& t = toks[mention.first - back].lower;
    if (t == "left" || t == "right" || t == "bilateral") {
      return Span{mention.first - back, mention.first - back + 1};
    }
  }
  return std::nullopt;
}

std::string slice(std::string_view sentence, const std::vector<Token>& toks, Span s) {
  return std::string(sentence.substr(toks[s.first].begin, toks[s.last - 1].end - toks[s.first].begin));
}

std::string find_attributes(std::string_view sentence, const std::vector<Token>& toks, Span mention,
                            std::optional<Span> location) {
  auto reserved = [&](std::size_t i) {
    return mention.contains(i) || (location && location->contains(i));
  };
  std::vector<Span> parts;

  // "... with <attribute phrase>" clause.
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].lower != "with" || reserved(i)) continue;
    Span s{i + 1, i + 1};
    while (s.last < toks.size() && !reserved(s.last) && s.last - s.first < 6) {
      if (s.last > s.first && punct_between(sentence, toks[s.last - 1], toks[s.last])) break;
      ++s.last;
    }
    if (!s.empty()) parts.push_back(s);
    break;
  }

  const auto& mods = Lexicon::builtin().attribute_modifiers();
  for (const auto& mod : mods) {
    const auto mod_toks = word_tokens(mod);
    for (std::size_t i = 0; i + mod_toks.size() <= toks.size(); ++i) {
      bool match = true;
      for (std::size_t k = 0; k < mod_toks.size() && match; ++k) {
        match = toks[i + k].lower == mod_toks[k] && !reserved(i + k);
      }
      if (!match) continue;
      Span s{i, i + mod_toks.size()};
      const bool covered = std::any_of(parts.begin(), parts.end(), [&](const Span& p) {
        return s.first < p.last && p.first < s.last;
      });
      if (!covered) parts.push_back(s);
    }
  }
  std::sort(parts.begin(), parts.end(), [](const Span& a, const Span& b) { return a.first < b.first; });
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ", ";
    out += slice(sentence, toks, p);
  }
  return out;
}

struct Mention {
  Span span;
  const LexiconEntry* entry = nullptr;
};

std::vector<Mention> find_mentions(const std::vector<Token>& toks) {
  std::vector<Mention> out;
  std::vector<bool> claimed(toks.size(), false);
  for (const auto& [form, entry] : Lexicon::builtin().surface_forms()) {
    const auto form_toks = word_tokens(form);
    if (form_toks.empty()) continue;
    for (std::size_t i = 0; i + form_toks.size() <= toks.size(); ++i) {
      bool match = true;
      for (std::size_t k = 0; k < form_toks.size() && match; ++k) {
        match = !claimed[i + k] && toks[i + k].lower == form_toks[k];
      }
      if (!match) continue;
      for (std::size_t k = 0; k < form_toks.size(); ++k) claimed[i + k] = true;
      out.push_back({Span{i, i + form_toks.size()}, entry});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Mention& a, const Mention& b) { return a.span.first < b.span.first; });
  return out;
}

std::string strip_terminal_period(std::string s) {
  while (!s.empty() && (s.back() == '.' || std::isspace(static_cast<unsigned char>(s.back())))) {
    s.pop_back();
  }
  return s;
}

}  // namespace

ReportDecomposition extract_units(std::string_view report_text) {
  if (trim(report_text).empty()) throw Error(ErrorCode::kEmptyReport, "report text is empty");

  std::vector<AbnormalityUnit> units;
  std::vector<const LexiconEntry*> unit_entries;
  for (const auto& raw : split_sentences(report_text)) {
    const std::string sentence = strip_terminal_period(raw);
    const std::string normalized = normalize_phrase(sentence);
    if (normalized.empty() || is_negated(normalized)) continue;
    const auto toks = tokenize_sentence(sentence);
    const bool uncertain = is_uncertain(normalized);

    for (const auto& m : find_mentions(toks)) {
      AbnormalityUnit u;
      u.name = m.entry->name;
      u.evidence = sentence;
      auto loc = find_location(sentence, toks, m.span);
      if (!loc) loc = laterality_before(toks, m.span);
      if (loc) u.location = slice(sentence, toks, *loc);
      u.attributes = find_attributes(sentence, toks, m.span, loc);
      u.certainty = uncertain ? Certainty::kPossible : Certainty::kDefinite;
      u.organ = m.entry->organ;
      if (u.organ == Organ::kOther && !u.location.empty()) {
        u.organ = organ_from_text(u.location).value_or(Organ::kOther);
      }
      // Fall back to fewer fields rather than emit a unit that breaks the
      // name/location/attribute separation rule.
      try {
        validate_unit(u);
      } catch (const Error&) {
        u.attributes.clear();
        try {
          validate_unit(u);
        } catch (const Error&) {
          u.location.clear();
        }
      }

      auto same = std::find(unit_entries.begin(), unit_entries.end(), m.entry);
      if (same != unit_entries.end()) {
        auto& prior = units[static_cast<std::size_t>(same - unit_entries.begin())];
        if (prior.location.empty()) prior.location = u.location;
        if (prior.attributes.empty()) prior.attributes = u.attributes;
        try {
          validate_unit(prior);
        } catch (const Error&) {
          prior.attributes.clear();
        }
        continue;
      }
      units.push_back(std::move(u));
      unit_entries.push_back(m.entry);
    }
  }
  return ReportDecomposition(std::move(units));
}

ReportDecomposition extract_units(std::string_view report_text, llm::LlmClient& client) {
  if (trim(report_text).empty()) throw Error(ErrorCode::kEmptyReport, "report text is empty");
  const std::string prompt =
      llm::render_prompt(llm::PromptTemplate::kExtract, {{"report", std::string(report_text)}});
  try {
    auto parsed = llm::complete_validated(client, prompt, llm::ResponseSchema::kDecomposition);
    return std::get<ReportDecomposition>(std::move(parsed));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUnparseable || e.code() == ErrorCode::kSchemaViolation ||
        e.code() == ErrorCode::kMalformedJson) {
      throw Error(ErrorCode::kExtractionFailed, std::string("extraction response invalid: ") + e.what(),
                  e.path());
    }
    throw;
  }
}

// ---------------------------------------------------------------------------
// Lexical matching

namespace {

constexpr std::array<std::string_view, 3> kLaterality = {"left", "right", "bilateral"};

bool is_laterality(std::string_view t) {
  return std::find(kLaterality.begin(), kLaterality.end(), t) != kLaterality.end();
}

constexpr std::array<std::string_view, 3> kLevel = {"upper", "middle", "lower"};

bool is_level(std::string_view t) { return std::find(kLevel.begin(), kLevel.end(), t) != kLevel.end(); }

std::string stem(std::string t) {
  if (t.size() > 3 && t.back() == 's') {
    const char prev = t[t.size() - 2];
    if (prev != 's' && prev != 'u' && prev != 'i') t.pop_back();
  }
  return t;
}

std::set<std::string> match_tokens(std::string_view s) {
  std::set<std::string> out;
  for (auto& t : word_tokens(s)) {
    if (!is_stopword(t)) out.insert(stem(std::move(t)));
  }
  return out;
}

}  // namespace

bool names_match(std::string_view a, std::string_view b) {
  const auto& lex = Lexicon::builtin();
  return lex.canonical_key(a) == lex.canonical_key(b);
}

bool locations_match(std::string_view gt, std::string_view pred) {
  const auto g = match_tokens(gt);
  if (g.empty()) return true;  // ground truth imposes no location constraint
  const auto p = match_tokens(pred);
  if (p.empty()) return false;
  // Stated levels must agree ("upper lobe" vs "lower lobe").
  for (const auto& t : p) {
    if (is_level(t) && !g.count(t) && std::any_of(g.begin(), g.end(), [](const std::string& x) { return is_level(x); })) {
      return false;
    }
  }
  bool has_anatomy = false;
  bool shares_anatomy = false;
  for (const auto& t : g) {
    if (is_laterality(t)) {
      if (!p.count(t)) return false;
    } else {
      has_anatomy = true;
      if (p.count(t)) shares_anatomy = true;
    }
  }
  // A side-only prediction ("left") cannot contradict the anatomy.
  const bool side_only = std::all_of(p.begin(), p.end(), [](const std::string& t) { return is_laterality(t); });
  return !has_anatomy || shares_anatomy || side_only;
}

bool attributes_match(std::string_view gt, std::string_view pred) {
  const auto g = match_tokens(gt);
  const auto p = match_tokens(pred);
  if (g.empty() && p.empty()) return true;
  std::size_t inter = 0;
  for (const auto& t : g) inter += p.count(t);
  const std::size_t uni = g.size() + p.size() - inter;
  return 2 * inter >= uni;  // Jaccard >= 0.5
}

MatchResult lexical_match(const std::vector<AbnormalityUnit>& gt,
                          const std::vector<AbnormalityUnit>& pred) {
  MatchResult m;
  m.pred_count = pred.size();
  std::vector<bool> used(pred.size(), false);
  for (const auto& g : gt) {
    UnitJudgment j;
    j.name = g.name;
    for (std::size_t k = 0; k < pred.size(); ++k) {
      if (used[k] || !names_match(g.name, pred[k].name)) continue;
      used[k] = true;
      j.hit = true;
      j.location_match = locations_match(g.location, pred[k].location);
      j.attribute_match = attributes_match(g.attributes, pred[k].attributes);
      break;
    }
    m.judgments.push_back(std::move(j));
  }
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (!used[k]) m.false_positives.push_back(pred[k].name);
  }
  return m;
}

namespace {

bool blank_text(const Prediction& pred) {
  return std::holds_alternative<std::string>(pred) && trim(std::get<std::string>(pred)).empty();
}

}  // namespace

// A blank prediction is a legitimate rollout that asserts nothing: every
// ground-truth unit is missed and M = 0.
MatchResult match_reports(const ReportDecomposition& gt, const Prediction& pred) {
  if (blank_text(pred)) return lexical_match(gt.units(), {});
  const ReportDecomposition units = std::holds_alternative<std::string>(pred)
                                        ? extract_units(std::get<std::string>(pred))
                                        : std::get<ReportDecomposition>(pred);
  return lexical_match(gt.units(), units.units());
}

MatchResult match_reports(const ReportDecomposition& gt, const Prediction& pred, llm::LlmClient& client) {
  if (blank_text(pred)) return lexical_match(gt.units(), {});
  const std::string pred_text = std::holds_alternative<std::string>(pred)
                                    ? std::get<std::string>(pred)
                                    : decomposition_to_json(std::get<ReportDecomposition>(pred)).dump(2);
  const std::string prompt = llm::render_prompt(
      llm::PromptTemplate::kMatch, {{"gt", decomposition_to_json(gt).dump(2)}, {"pred", pred_text}});
  DecodedMatch decoded;
  try {
    decoded = std::get<DecodedMatch>(llm::complete_validated(client, prompt, llm::ResponseSchema::kMatch));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUnparseable || e.code() == ErrorCode::kSchemaViolation ||
        e.code() == ErrorCode::kMalformedJson) {
      throw Error(ErrorCode::kMatchFailed, std::string("match response invalid: ") + e.what(), e.path());
    }
    throw;
  }
  MatchResult& m = decoded.result;
  if (m.judgments.size() != gt.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "judge returned " + std::to_string(m.judgments.size()) + " judgments for " +
                    std::to_string(gt.size()) + " ground-truth units",
                "abnormalities");
  }
  // Realign by name when the judge permuted the list; otherwise positional.
  std::vector<UnitJudgment> aligned;
  std::vector<bool> taken(m.judgments.size(), false);
  for (const auto& u : gt.units()) {
    for (std::size_t k = 0; k < m.judgments.size(); ++k) {
      if (!taken[k] && m.judgments[k].name == u.name) {
        taken[k] = true;
        aligned.push_back(m.judgments[k]);
        break;
      }
    }
  }
  if (aligned.size() == gt.size()) {
    m.judgments = std::move(aligned);
  } else {
    for (std::size_t i = 0; i < gt.size(); ++i) m.judgments[i].name = gt[i].name;
  }
  return m;
}

MatchResult match_reports(const ReportDecomposition& gt, const Prediction& pred, const MatchBackend& backend) {
  return backend.llm ? match_reports(gt, pred, *backend.llm) : match_reports(gt, pred);
}

ReportDecomposition extract_units(std::string_view report_text, const MatchBackend& backend) {
  return backend.llm ? extract_units(report_text, *backend.llm) : extract_units(report_text);
}

}  // namespace cabs_eval
