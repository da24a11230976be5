#pragma once

#include <cstddef>
#include <vector>

#include "mpvaa/numkit/rng.hpp"
#include "mpvaa/numkit/tensor.hpp"

namespace mpvaa::net {

// Per-head projections stored side by side: head h owns columns
// [h * d_m / heads, (h + 1) * d_m / heads) of wq/wk and the matching block of wv.
struct AttentionParams {
  nk::Tensor wq;  // d_in x d_m
  nk::Tensor wk;  // d_in x d_m
  nk::Tensor wv;  // d_in x d_v
  nk::Tensor wo;  // d_v x d_m
};

AttentionParams init_attention(std::size_t d_in, std::size_t d_m, std::size_t d_v,
                               nk::SeededRng& rng, nk::Dtype dtype);

// MultiHead(Q, K, V) = [head_1; ...; head_h] Wo with
// head_i = softmax(Q Wq_i (K Wk_i)^T / sqrt(d_m / heads)) V Wv_i.
// With causal = true, query row j only attends to key rows <= j. When
// `weights` is non-null it receives each head's attention matrix.
nk::Tensor multi_head_attention(const nk::Tensor& query, const nk::Tensor& key,
                                const nk::Tensor& value, const AttentionParams& params,
                                std::size_t heads, bool causal,
                                std::vector<nk::Tensor>* weights = nullptr);

}  // namespace mpvaa::net
