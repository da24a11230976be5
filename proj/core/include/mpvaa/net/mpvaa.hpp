#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "mpvaa/graph/gae.hpp"
#include "mpvaa/net/model.hpp"
#include "mpvaa/numkit/tensor.hpp"

namespace mpvaa::net {

// Row j = Z[m_j] (plus sinusoid(j) when with_positions). LookupError for a
// concept outside the embedding's node set.
nk::Tensor embed_sequence(std::span<const std::size_t> sequence,
                          const graph::InnerViewEmbedding& embedding, bool with_positions = false);

// PE[t][2i] = sin(t / 10000^(2i/d)), PE[t][2i+1] = cos(t / 10000^(2i/d)).
nk::Tensor sinusoidal_positions(std::size_t length, std::size_t dim, nk::Dtype dtype);

// Input embeddings of one patient sequence for the three views.
struct PatientViews {
  std::vector<std::size_t> sequence;  // flattened concepts, the reconstruction target
  nk::Tensor dem;
  nk::Tensor lab;
  nk::Tensor notes;

  const nk::Tensor& view(graph::View v) const;
};

PatientViews make_patient_views(std::span<const std::size_t> sequence,
                                const std::array<graph::InnerViewEmbedding, 3>& embeddings,
                                const HyperParams& hp, nk::Dtype dtype = nk::Dtype::f32);

// A = LayerNorm(MultiHead(E, E, E) + E); H = LayerNorm(FFN(A) + A).
nk::Tensor encoder_forward(const nk::Tensor& embedded, const EncoderParams& params,
                           std::size_t heads);

// lambda * max_t H[t] + (1 - lambda) * mean_t H[t], per feature column.
nk::Tensor mixed_pool(const nk::Tensor& hidden, double lambda);

// Variant-specific aggregation of encoder states to a 1 x pooled_dim row.
nk::Tensor pool_hidden(const nk::Tensor& hidden, const HyperParams& hp, double lambda);

// C' = tanh(z_dem W_dem + z_lab W_lab + z_notes W_notes), a 1 x d_m row.
nk::Tensor fuse_views(const nk::Tensor& z_dem, const nk::Tensor& z_lab, const nk::Tensor& z_notes,
                      const FusionParams& params);

struct CrossView {
  nk::Tensor fused;  // C'
  nk::Tensor gate;   // softmax over the d_m entries of C'
  nk::Tensor c;      // gate broadcast over the rows of A_d_sa, elementwise
};

CrossView cross_view(const nk::Tensor& z_dem, const nk::Tensor& z_lab, const nk::Tensor& z_notes,
                     const nk::Tensor& self_attended, const FusionParams& params);

// (0, e_1, ..., e_{T-1}); with extend = true, (0, e_1, ..., e_T) so the last
// row predicts the position after the sequence.
nk::Tensor shift_right(const nk::Tensor& embedded, bool extend = false);

struct DecoderTrace {
  nk::Tensor self_attended;  // A_d_sa
  CrossView cross;
  nk::Tensor hidden;  // H_d
};

// Causal self-attention on the shifted input, multi-view attention against C
// (also causal, so row j never sees C rows > j), then feed-forward; each
// sub-layer wrapped in residual + layer norm.
DecoderTrace decoder_forward(const nk::Tensor& shifted, const nk::Tensor& z_dem,
                             const nk::Tensor& z_lab, const nk::Tensor& z_notes,
                             const MpvaaParams& params);

// H_d W_p + b_p: unnormalized log-probabilities over the N concepts.
nk::Tensor sequence_logits(const nk::Tensor& hidden, const OutputParams& params);

// Mean over positions of -log P(m_j | ...), probabilities floored at 1e-12.
nk::Tensor reconstruction_loss(const nk::Tensor& logits, std::span<const std::size_t> targets);

struct EncodedViews {
  std::array<nk::Tensor, 3> hidden;  // H_e per view
  std::array<nk::Tensor, 3> pooled;  // z per view
};

EncodedViews encode_views(const MpvaaParams& params, const PatientViews& views, double lambda);

struct ForwardPass {
  EncodedViews encoded;
  DecoderTrace decoder;
  nk::Tensor logits;  // T x N (T + 1 rows when extended)
};

// Teacher-forced reconstruction pass.
ForwardPass forward(const MpvaaParams& params, const PatientViews& views, double lambda,
                    bool extend = false);

// Summed NLL of the sequence under teacher forcing (token count = T).
nk::Tensor sequence_nll(const MpvaaParams& params, const PatientViews& views, double lambda);

// Next-concept logits after the full sequence (1 x N).
nk::Tensor next_position_logits(const MpvaaParams& params, const PatientViews& views,
                                double lambda);

struct PatientRepresentation {
  std::vector<double> fused;  // C', d_m values
  std::vector<double> z_dem;  // pooled dem representation
};

// Evaluation-time representation at a fixed lambda. ContractError when the
// parameters are empty.
PatientRepresentation patient_representation(const MpvaaParams& params, const PatientViews& views,
                                             double lambda);

}  // namespace mpvaa::net
