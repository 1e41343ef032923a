#include "cabs/lexicon.hpp"

#include <algorithm>

#include "cabs/text.hpp"
#include "embedded_data.hpp"

namespace cabs_eval {

Lexicon::Lexicon() {
  const Json doc = Json::parse(data::kEntityLexiconJson);
  version_ = doc.at("version").get<int>();
  for (const auto& e : doc.at("entities")) {
    LexiconEntry entry;
    entry.name = e.at("name").get<std::string>();
    auto organ = organ_from_label(e.at("organ").get<std::string>());
    if (!organ) throw std::logic_error("entity lexicon: bad organ for " + entry.name);
    entry.organ = *organ;
    entry.forms = e.at("forms").get<std::vector<std::string>>();
    entries_.push_back(std::move(entry));
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    by_form_.emplace(normalize_phrase(entries_[i].name), i);
    for (const auto& f : entries_[i].forms) by_form_.emplace(normalize_phrase(f), i);
  }
  for (const auto& [form, idx] : by_form_) surface_forms_.emplace_back(form, &entries_[idx]);
  std::stable_sort(surface_forms_.begin(), surface_forms_.end(), [](const auto& a, const auto& b) {
    return a.first.size() > b.first.size();
  });

  modifiers_ = doc.at("attribute_modifiers").get<std::vector<std::string>>();
  anatomy_ = doc.at("anatomy_terms").get<std::vector<std::string>>();
  for (Organ o : kAllOrgans) {
    auto list = doc.at("locations").at(std::string(to_string(o))).get<std::vector<std::string>>();
    all_locations_.insert(all_locations_.end(), list.begin(), list.end());
    locations_.emplace(o, std::move(list));
  }
  attributes_ = doc.at("attributes").get<std::vector<std::string>>();
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lexicon;
  return lexicon;
}

const LexiconEntry* Lexicon::lookup(std::string_view name) const {
  auto it = by_form_.find(normalize_phrase(name));
  return it == by_form_.end() ? nullptr : &entries_[it->second];
}

std::string Lexicon::canonical_key(std::string_view name) const {
  if (const auto* e = lookup(name)) return normalize_phrase(e->name);
  return normalize_phrase(name);
}

bool Lexicon::is_anatomy_term(std::string_view token) const {
  return std::find(anatomy_.begin(), anatomy_.end(), token) != anatomy_.end();
}

const std::vector<std::string>& Lexicon::locations(Organ organ) const {
  return locations_.at(organ);
}

std::optional<Organ> organ_from_text(std::string_view text) {
  const auto tokens = word_tokens(text);
  // Two-word aliases first ("small bowel"), then single words.
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    const std::string pair = tokens[i] + " " + tokens[i + 1];
    Organ o = canonical_organ(pair);
    if (o != Organ::kOther || pair == "other") return o;
  }
  for (const auto& t : tokens) {
    Organ o = canonical_organ(t);
    if (o != Organ::kOther) return o;
  }
  return std::nullopt;
}

}  // namespace cabs_eval
