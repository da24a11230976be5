#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mpvaa::ehr {

enum class Category { diagnosis, procedure, medication };

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view s);

// Dense, bijective code <-> index map over [0, N).
class ConceptVocabulary {
 public:
  // Returns the new index; ContractError on a duplicate code.
  std::size_t add(std::string code, Category category);

  std::size_t size() const { return codes_.size(); }
  const std::string& code(std::size_t index) const;
  Category category(std::size_t index) const;
  std::optional<std::size_t> find(std::string_view code) const;
  // LookupError when the code is unknown.
  std::size_t index_of(std::string_view code) const;

  std::vector<std::size_t> indices_of(Category category) const;

  bool operator==(const ConceptVocabulary& other) const {
    return codes_ == other.codes_ && categories_ == other.categories_;
  }

 private:
  std::vector<std::string> codes_;
  std::vector<Category> categories_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mpvaa::ehr
