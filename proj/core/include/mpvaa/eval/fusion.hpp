#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mpvaa/numkit/tensor.hpp"
#include "mpvaa/train/embedding_store.hpp"

namespace mpvaa::eval {

enum class FusionMethod { concat, avg };

std::string_view to_string(FusionMethod m);
std::optional<FusionMethod> parse_fusion(std::string_view s);

// Row-wise l2 normalization; all-zero rows stay zero.
nk::Tensor l2_normalize_rows(const nk::Tensor& z);

// Each view l2-normalized per row, then concatenated (3 d_k columns) or
// averaged (d_k columns). ShapeError unless the three share a shape.
nk::Tensor baseline_fuse(FusionMethod method, const nk::Tensor& z_dem, const nk::Tensor& z_lab,
                         const nk::Tensor& z_notes);

// Mean of the fused rows over the flattened concept sequence.
std::vector<double> baseline_patient_vector(FusionMethod method, const train::ViewEmbeddings& views,
                                            std::span<const std::size_t> sequence);

}  // namespace mpvaa::eval
