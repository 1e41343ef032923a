#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cabs/core.hpp"

namespace cabs_eval {

struct LexiconEntry {
  std::string name;                ///< canonical entity name
  Organ organ = Organ::kOther;     ///< default organ for the entity
  std::vector<std::string> forms;  ///< surface variants (plurals, synonyms)
};

/// Built-in entity lexicon shipped with the library (data/entity_lexicon.json).
/// Used by the rule-based extractor, the lexical matcher's synonym test, and
/// the synthetic corpus generators.
class Lexicon {
 public:
  static const Lexicon& builtin();

  int version() const { return version_; }
  const std::vector<LexiconEntry>& entries() const { return entries_; }

  /// Canonical entry for a name or any of its surface forms, after
  /// normalize_phrase. nullptr when unknown.
  const LexiconEntry* lookup(std::string_view name) const;

  /// Normalized canonical name if known, else normalize_phrase(name).
  std::string canonical_key(std::string_view name) const;

  /// (normalized surface form, entry) pairs, longest form first.
  const std::vector<std::pair<std::string, const LexiconEntry*>>& surface_forms() const {
    return surface_forms_;
  }

  const std::vector<std::string>& attribute_modifiers() const { return modifiers_; }
  bool is_anatomy_term(std::string_view token) const;
  const std::vector<std::string>& locations(Organ organ) const;
  const std::vector<std::string>& all_locations() const { return all_locations_; }
  const std::vector<std::string>& attributes() const { return attributes_; }

 private:
  Lexicon();

  int version_ = 0;
  std::vector<LexiconEntry> entries_;
  std::map<std::string, std::size_t> by_form_;
  std::vector<std::pair<std::string, const LexiconEntry*>> surface_forms_;
  std::vector<std::string> modifiers_;
  std::vector<std::string> anatomy_;
  std::map<Organ, std::vector<std::string>> locations_;
  std::vector<std::string> all_locations_;
  std::vector<std::string> attributes_;
};

/// Organ inferred from anatomical words in free text via the alias table;
/// nullopt when no organ word is present.
std::optional<Organ> organ_from_text(std::string_view text);

}  // namespace cabs_eval
