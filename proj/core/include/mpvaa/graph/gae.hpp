#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mpvaa/graph/view_graph.hpp"
#include "mpvaa/numkit/rng.hpp"
#include "mpvaa/numkit/tensor.hpp"

namespace mpvaa::graph {

struct GaeConfig {
  std::size_t d_k = 32;
  std::size_t d_hidden = 0;  // 0 selects 2 * d_k
  std::size_t epochs = 100;
  double lr = 0.01;
  // Draw W0 row r from a stream keyed by the concept at node r (and W1 from a
  // shared stream), so every patient starts from the same concept-indexed
  // weights restricted to its nodes. Off: one independent draw per graph.
  bool keyed_init = true;

  std::size_t hidden() const { return d_hidden ? d_hidden : 2 * d_k; }
};

struct GaeParams {
  nk::Tensor w0;  // features x hidden
  nk::Tensor w1;  // hidden x d_k
};

GaeParams init_gae_params(std::size_t features, const GaeConfig& config, nk::SeededRng& rng,
                          nk::Dtype dtype = nk::Dtype::f32);

// Concept-keyed initialization: row r of W0 depends only on (seed, nodes[r])
// up to the Xavier bound for this graph's width, W1 only on seed.
GaeParams init_gae_params_keyed(std::span<const std::size_t> nodes, const GaeConfig& config,
                                std::uint64_t seed, nk::Dtype dtype = nk::Dtype::f32);

// Z = softmax_rows(A_norm * relu(A_norm * X * W0) * W1)
nk::Tensor gcn_forward(const nk::Tensor& features, const nk::Tensor& norm_adjacency,
                       const GaeParams& params);

// Weighted BCE between sigmoid(Z Z^T) and A + I. Positive entries are
// weighted by #zero / #one entries of A + I (1 when A + I has no zeros).
nk::Tensor gae_reconstruction_loss(const nk::Tensor& z, const nk::Tensor& adjacency);

struct InnerViewEmbedding {
  View view = View::dem;
  std::vector<std::size_t> nodes;  // sorted concept indices, one per row of z
  nk::Tensor z;                    // nodes x d_k

  // LookupError for a concept outside the patient's node set.
  std::size_t row_of(std::size_t concept_index) const;
};

struct GaeResult {
  InnerViewEmbedding embedding;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Full-batch Adam on the reconstruction loss. With keyed_init the rng's seed
// keys the initialization. Throws NumericError when the
// loss becomes non-finite.
GaeResult train_gae(const ViewGraph& graph, const GaeConfig& config, nk::SeededRng rng,
                    nk::Dtype dtype = nk::Dtype::f32);

// Same, starting from caller-provided parameters.
GaeResult train_gae(const ViewGraph& graph, const GaeConfig& config, GaeParams params);

}  // namespace mpvaa::graph
