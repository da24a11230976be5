#include "mpvaa/ehr/vocabulary.hpp"

#include "mpvaa/errors.hpp"

namespace mpvaa::ehr {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::diagnosis:
      return "diagnosis";
    case Category::procedure:
      return "procedure";
    case Category::medication:
      return "medication";
  }
  return "?";
}

std::optional<Category> parse_category(std::string_view s) {
  if (s == "diagnosis") return Category::diagnosis;
  if (s == "procedure") return Category::procedure;
  if (s == "medication") return Category::medication;
  return std::nullopt;
}

std::size_t ConceptVocabulary::add(std::string code, Category category) {
  if (code.empty()) throw ContractError("concept code must be non-empty");
  if (index_.contains(code)) throw ContractError("duplicate concept code '" + code + "'");
  const std::size_t idx = codes_.size();
  index_.emplace(code, idx);
  codes_.push_back(std::move(code));
  categories_.push_back(category);
  return idx;
}

const std::string& ConceptVocabulary::code(std::size_t index) const {
  if (index >= codes_.size()) throw LookupError("concept index out of range");
  return codes_[index];
}

Category ConceptVocabulary::category(std::size_t index) const {
  if (index >= categories_.size()) throw LookupError("concept index out of range");
  return categories_[index];
}

std::optional<std::size_t> ConceptVocabulary::find(std::string_view code) const {
  auto it = index_.find(std::string(code));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ConceptVocabulary::index_of(std::string_view code) const {
  if (auto idx = find(code)) return *idx;
  throw LookupError("unknown concept code '" + std::string(code) + "'");
}

std::vector<std::size_t> ConceptVocabulary::indices_of(Category category) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i] == category) out.push_back(i);
  }
  return out;
}

}  // namespace mpvaa::ehr
