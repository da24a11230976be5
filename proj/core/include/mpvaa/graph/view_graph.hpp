#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mpvaa/ehr/record.hpp"
#include "mpvaa/numkit/tensor.hpp"

namespace mpvaa::graph {

enum class View { dem, lab, notes };
inline constexpr std::array<View, 3> kViews = {View::dem, View::lab, View::notes};
std::string_view to_string(View v);

// Maps note tokens to concept mentions. Replaceable by any tokenizer/entity
// linker that yields token ids plus a mention lookup.
class NoteFeaturizer {
 public:
  virtual ~NoteFeaturizer() = default;
  virtual std::optional<std::size_t> mention_of(std::size_t token) const = 0;
  virtual std::size_t vocab_size() const = 0;
};

// Token ids >= word_vocab are mentions of concept (id - word_vocab).
class OffsetMentionFeaturizer final : public NoteFeaturizer {
 public:
  OffsetMentionFeaturizer(std::size_t word_vocab, std::size_t concepts)
      : word_vocab_(word_vocab), concepts_(concepts) {}
  std::optional<std::size_t> mention_of(std::size_t token) const override;
  std::size_t vocab_size() const override { return word_vocab_ + concepts_; }

 private:
  std::size_t word_vocab_;
  std::size_t concepts_;
};

inline constexpr std::size_t kDemFeatureCount = 9;
inline constexpr std::size_t kDefaultWindow = 2;

struct FeatureContext {
  std::size_t lab_items = 0;
  std::size_t lab_bins = 0;
  const NoteFeaturizer* notes = nullptr;
  std::size_t window = kDefaultWindow;

  std::size_t width(View v) const;
};

using BinaryVector = std::vector<std::uint8_t>;

// Raw per-concept feature indicator for one view, over the visits that
// contain the concept:
//   dem   9 slots {old, adult, neonate, middle, healthy, overweight,
//         underweight, male, female}
//   lab   one slot per (item, bin) tuple, index item * bins + bin
//   notes one slot per note token within `window` of a mention of the concept;
//         when the concept is never mentioned, the contexts of co-occurring
//         concepts in those visits are used instead
// ContractError when the concept does not occur in the record.
BinaryVector intermediate_features(View view, std::size_t concept_index,
                                   const ehr::PatientRecord& record, const FeatureContext& ctx);

// 2|x & y| / (|x| + |y|); 0 when both vectors are all zero.
double dice(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y);

// A[a][b] = 1 iff a != b share at least one visit. Nodes index rows/cols.
nk::Tensor build_adjacency(const ehr::PatientRecord& record, std::span<const std::size_t> nodes);

// D^-1/2 (A + I) D^-1/2 with degrees of A + I.
nk::Tensor normalize_adjacency(const nk::Tensor& adjacency);

// X[a][b] = dice(x'_a, x'_b) over the node list.
nk::Tensor dice_feature_matrix(View view, const ehr::PatientRecord& record,
                               std::span<const std::size_t> nodes, const FeatureContext& ctx);

struct ViewGraph {
  View view = View::dem;
  std::vector<std::size_t> nodes;  // sorted distinct concepts of the record
  nk::Tensor adjacency;            // binary, symmetric, zero diagonal
  nk::Tensor features;             // N_p x N_p Dice matrix
};

ViewGraph build_view_graph(View view, const ehr::PatientRecord& record, const FeatureContext& ctx);

}  // namespace mpvaa::graph
