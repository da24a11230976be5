#include "mpvaa/graph/view_graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mpvaa/errors.hpp"

namespace mpvaa::graph {

using ehr::PatientRecord;
using ehr::Visit;

std::string_view to_string(View v) {
  switch (v) {
    case View::dem:
      return "dem";
    case View::lab:
      return "lab";
    case View::notes:
      return "notes";
  }
  return "?";
}

std::optional<std::size_t> OffsetMentionFeaturizer::mention_of(std::size_t token) const {
  if (token >= word_vocab_ && token < word_vocab_ + concepts_) return token - word_vocab_;
  return std::nullopt;
}

std::size_t FeatureContext::width(View v) const {
  switch (v) {
    case View::dem:
      return kDemFeatureCount;
    case View::lab:
      return lab_items * lab_bins;
    case View::notes:
      if (notes == nullptr) throw ContractError("notes view needs a NoteFeaturizer");
      return notes->vocab_size();
  }
  return 0;
}

namespace {

bool visit_has(const Visit& v, std::size_t c) {
  return std::find(v.concepts.begin(), v.concepts.end(), c) != v.concepts.end();
}

std::size_t dem_slot(ehr::AgeBin a) {
  switch (a) {
    case ehr::AgeBin::old:
      return 0;
    case ehr::AgeBin::adult:
      return 1;
    case ehr::AgeBin::neonate:
      return 2;
    case ehr::AgeBin::middle:
      return 3;
  }
  return 0;
}

std::size_t dem_slot(ehr::WeightBin w) {
  switch (w) {
    case ehr::WeightBin::healthy:
      return 4;
    case ehr::WeightBin::overweight:
      return 5;
    case ehr::WeightBin::underweight:
      return 6;
  }
  return 4;
}

std::size_t dem_slot(ehr::Gender g) { return g == ehr::Gender::male ? 7 : 8; }

// Marks tokens within the window around each mention of `c` in one note.
// Returns whether any mention was found.
bool mark_mention_context(const std::vector<std::size_t>& tokens, std::size_t c,
                          const FeatureContext& ctx, BinaryVector& out) {
  bool found = false;
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    if (ctx.notes->mention_of(tokens[p]) != c) continue;
    found = true;
    const std::size_t lo = p >= ctx.window ? p - ctx.window : 0;
    const std::size_t hi = std::min(tokens.size() - 1, p + ctx.window);
    for (std::size_t q = lo; q <= hi; ++q) {
      if (q != p) out[tokens[q]] = 1;
    }
  }
  return found;
}

}  // namespace

BinaryVector intermediate_features(View view, std::size_t concept_index,
                                   const PatientRecord& record, const FeatureContext& ctx) {
  const std::size_t width = ctx.width(view);
  BinaryVector out(width, 0);
  bool occurs = false;
  for (const Visit& v : record.visits) {
    if (!visit_has(v, concept_index)) continue;
    occurs = true;
    switch (view) {
      case View::dem:
        out[dem_slot(v.demo.age)] = 1;
        out[dem_slot(v.demo.weight)] = 1;
        out[dem_slot(v.demo.gender)] = 1;
        break;
      case View::lab:
        for (const auto& l : v.labs) {
          if (l.item >= ctx.lab_items || l.bin >= ctx.lab_bins) {
            throw ContractError("lab tuple outside the feature context");
          }
          out[l.item * ctx.lab_bins + l.bin] = 1;
        }
        break;
      case View::notes:
        break;
    }
  }
  if (!occurs) {
    throw ContractError("concept " + std::to_string(concept_index) +
                        " does not occur in patient '" + record.id + "'");
  }
  if (view != View::notes) return out;

  bool mentioned = false;
  for (const Visit& v : record.visits) {
    if (visit_has(v, concept_index)) {
      mentioned = mark_mention_context(v.note_tokens, concept_index, ctx, out) || mentioned;
    }
  }
  if (mentioned) return out;
  for (const Visit& v : record.visits) {
    if (!visit_has(v, concept_index)) continue;
    for (std::size_t other : v.concepts) {
      if (other != concept_index) mark_mention_context(v.note_tokens, other, ctx, out);
    }
  }
  return out;
}

double dice(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y) {
  if (x.size() != y.size()) {
    throw ContractError("dice: vector lengths differ (" + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()) + ")");
  }
  std::size_t both = 0, nx = 0, ny = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool a = x[i] != 0;
    const bool b = y[i] != 0;
    nx += a;
    ny += b;
    both += a && b;
  }
  if (nx + ny == 0) return 0.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(nx + ny);
}

nk::Tensor build_adjacency(const PatientRecord& record, std::span<const std::size_t> nodes) {
  const std::size_t n = nodes.size();
  if (n == 0) throw ContractError("build_adjacency: empty node list");
  auto position = [&](std::size_t c) -> std::optional<std::size_t> {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), c);
    if (it == nodes.end() || *it != c) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
  };
  std::vector<double> a(n * n, 0.0);
  for (const Visit& v : record.visits) {
    std::vector<std::size_t> pos;
    for (auto c : v.concepts) {
      if (auto p = position(c)) pos.push_back(*p);
    }
    for (auto i : pos) {
      for (auto j : pos) {
        if (i != j) a[i * n + j] = 1.0;
      }
    }
  }
  return nk::Tensor::from({n, n}, std::move(a), nk::Dtype::f64);
}

nk::Tensor normalize_adjacency(const nk::Tensor& adjacency) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) throw ShapeError("normalize_adjacency: matrix must be square");
  auto a = adjacency.data();
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;  // self-loop
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) deg += a[i * n + j];
    }
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double hat = i == j ? 1.0 : a[i * n + j];
      out[i * n + j] = inv_sqrt_deg[i] * hat * inv_sqrt_deg[j];
    }
  }
  return nk::Tensor::from({n, n}, std::move(out), adjacency.dtype());
}

nk::Tensor dice_feature_matrix(View view, const PatientRecord& record,
                               std::span<const std::size_t> nodes, const FeatureContext& ctx) {
  const std::size_t n = nodes.size();
  std::vector<BinaryVector> raw;
  raw.reserve(n);
  for (auto c : nodes) raw.push_back(intermediate_features(view, c, record, ctx));
  std::vector<double> x(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double d = dice(raw[i], raw[j]);
      x[i * n + j] = d;
      x[j * n + i] = d;
    }
  }
  return nk::Tensor::from({n, n}, std::move(x), nk::Dtype::f64);
}

ViewGraph build_view_graph(View view, const PatientRecord& record, const FeatureContext& ctx) {
  ViewGraph g;
  g.view = view;
  g.nodes = ehr::distinct_concepts(record);
  g.adjacency = build_adjacency(record, g.nodes);
  g.features = dice_feature_matrix(view, record, g.nodes, ctx);
  return g;
}

}  // namespace mpvaa::graph
