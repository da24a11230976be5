#include "mpvaa/net/mpvaa.hpp"

#include <cmath>
#include <string>

#include "mpvaa/numkit/ops.hpp"

namespace mpvaa::net {

nk::Tensor sinusoidal_positions(std::size_t length, std::size_t dim, nk::Dtype dtype) {
  std::vector<double> pe(length * dim);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate =
          std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(t) / rate;
      pe[t * dim + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return nk::Tensor::from({length, dim}, std::move(pe), dtype);
}

nk::Tensor embed_sequence(std::span<const std::size_t> sequence,
                          const graph::InnerViewEmbedding& embedding, bool with_positions) {
  if (sequence.empty()) throw ContractError("embed_sequence: empty concept sequence");
  std::vector<std::size_t> rows;
  rows.reserve(sequence.size());
  for (auto c : sequence) rows.push_back(embedding.row_of(c));
  nk::Tensor e = nk::gather_rows(embedding.z, rows);
  if (!with_positions) return e;
  return nk::add(e, sinusoidal_positions(e.rows(), e.cols(), e.dtype()));
}

const nk::Tensor& PatientViews::view(graph::View v) const {
  switch (v) {
    case graph::View::dem:
      return dem;
    case graph::View::lab:
      return lab;
    case graph::View::notes:
      return notes;
  }
  return dem;
}

PatientViews make_patient_views(std::span<const std::size_t> sequence,
                                const std::array<graph::InnerViewEmbedding, 3>& embeddings,
                                const HyperParams& hp, nk::Dtype dtype) {
  PatientViews pv;
  pv.sequence.assign(sequence.begin(), sequence.end());
  std::array<nk::Tensor*, 3> slots = {&pv.dem, &pv.lab, &pv.notes};
  for (std::size_t i = 0; i < 3; ++i) {
    if (embeddings[i].z.cols() != hp.d_k) {
      throw ShapeError("make_patient_views: " + std::string(graph::to_string(embeddings[i].view)) +
                       " embedding width " + std::to_string(embeddings[i].z.cols()) +
                       " differs from d_k=" + std::to_string(hp.d_k));
    }
    *slots[i] = embed_sequence(sequence, embeddings[i], hp.uses_positions()).to(dtype);
  }
  return pv;
}

namespace {

nk::Tensor feed_forward(const nk::Tensor& x, const FeedForwardParams& f) {
  return nk::add_bias(nk::matmul(nk::relu(nk::add_bias(nk::matmul(x, f.wa), f.ba)), f.wb), f.bb);
}

nk::Tensor residual_norm(const nk::Tensor& sublayer, const nk::Tensor& input, const NormParams& n) {
  return nk::layer_norm(nk::add(sublayer, input), n.gamma, n.beta);
}

}  // namespace

nk::Tensor encoder_forward(const nk::Tensor& embedded, const EncoderParams& params,
                           std::size_t heads) {
  if (embedded.cols() != params.attention.wq.rows()) {
    throw ShapeError("encoder_forward: input width " + std::to_string(embedded.cols()) +
                     " does not match d_k=" + std::to_string(params.attention.wq.rows()));
  }
  const nk::Tensor attended =
      multi_head_attention(embedded, embedded, embedded, params.attention, heads, false);
  const nk::Tensor a = residual_norm(attended, embedded, params.attention_norm);
  return residual_norm(feed_forward(a, params.ff), a, params.ff_norm);
}

nk::Tensor mixed_pool(const nk::Tensor& hidden, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ContractError("mixed_pool: lambda " + std::to_string(lambda) + " outside [0, 1]");
  }
  return nk::weighted_sum(nk::reduce_max(hidden, nk::Axis::rows), lambda,
                          nk::reduce_mean(hidden, nk::Axis::rows), 1.0 - lambda);
}

nk::Tensor pool_hidden(const nk::Tensor& hidden, const HyperParams& hp, double lambda) {
  switch (hp.variant) {
    case Variant::full:
    case Variant::sin:
      return mixed_pool(hidden, lambda);
    case Variant::mmvaa: {
      const nk::Tensor parts[] = {nk::reduce_max(hidden, nk::Axis::rows),
                                  nk::reduce_mean(hidden, nk::Axis::rows)};
      return nk::concat(parts, nk::Axis::cols);
    }
    case Variant::vaa:
      return nk::reduce_mean(hidden, nk::Axis::rows);
  }
  throw ContractError("pool_hidden: unknown variant");
}

nk::Tensor fuse_views(const nk::Tensor& z_dem, const nk::Tensor& z_lab, const nk::Tensor& z_notes,
                      const FusionParams& params) {
  nk::Tensor pre = nk::add(nk::matmul(z_dem, params.w_dem), nk::matmul(z_lab, params.w_lab));
  return nk::tanh(nk::add(pre, nk::matmul(z_notes, params.w_notes)));
}

CrossView cross_view(const nk::Tensor& z_dem, const nk::Tensor& z_lab, const nk::Tensor& z_notes,
                     const nk::Tensor& self_attended, const FusionParams& params) {
  CrossView cv;
  cv.fused = fuse_views(z_dem, z_lab, z_notes, params);
  cv.gate = nk::softmax_rows(cv.fused);
  cv.c = nk::mul_rowvec(self_attended, cv.gate);
  return cv;
}

nk::Tensor shift_right(const nk::Tensor& embedded, bool extend) {
  const std::size_t t = embedded.rows();
  const std::size_t d = embedded.cols();
  const nk::Tensor start = nk::Tensor::zeros({1, d}, embedded.dtype());
  const std::size_t keep = extend ? t : t - 1;
  if (keep == 0) return start;
  const nk::Tensor parts[] = {start, nk::slice(embedded, nk::Axis::rows, 0, keep)};
  return nk::concat(parts, nk::Axis::rows);
}

DecoderTrace decoder_forward(const nk::Tensor& shifted, const nk::Tensor& z_dem,
                             const nk::Tensor& z_lab, const nk::Tensor& z_notes,
                             const MpvaaParams& params) {
  const auto& dec = params.decoder;
  const std::size_t heads = params.hp.heads;
  DecoderTrace trace;
  const nk::Tensor self =
      multi_head_attention(shifted, shifted, shifted, dec.self_attention, heads, true);
  trace.self_attended = residual_norm(self, shifted, dec.self_norm);
  trace.cross = cross_view(z_dem, z_lab, z_notes, trace.self_attended, params.fusion);
  const nk::Tensor viewed = multi_head_attention(trace.self_attended, trace.cross.c,
                                                 trace.cross.c, dec.view_attention, heads, true);
  const nk::Tensor a = residual_norm(viewed, trace.self_attended, dec.view_norm);
  trace.hidden = residual_norm(feed_forward(a, dec.ff), a, dec.ff_norm);
  return trace;
}

nk::Tensor sequence_logits(const nk::Tensor& hidden, const OutputParams& params) {
  return nk::add_bias(nk::matmul(hidden, params.wp), params.bp);
}

nk::Tensor reconstruction_loss(const nk::Tensor& logits, std::span<const std::size_t> targets) {
  return nk::scale(nk::nll_rows_sum(logits, targets), 1.0 / static_cast<double>(targets.size()));
}

EncodedViews encode_views(const MpvaaParams& params, const PatientViews& views, double lambda) {
  EncodedViews out;
  for (std::size_t i = 0; i < 3; ++i) {
    const graph::View v = graph::kViews[i];
    out.hidden[i] = encoder_forward(views.view(v), params.encoder_for(v), params.hp.heads);
    out.pooled[i] = pool_hidden(out.hidden[i], params.hp, lambda);
  }
  return out;
}

ForwardPass forward(const MpvaaParams& params, const PatientViews& views, double lambda,
                    bool extend) {
  ForwardPass fp;
  fp.encoded = encode_views(params, views, lambda);
  const auto& z = fp.encoded.pooled;
  fp.decoder = decoder_forward(shift_right(views.dem, extend), z[0], z[1], z[2], params);
  fp.logits = sequence_logits(fp.decoder.hidden, params.output);
  return fp;
}

nk::Tensor sequence_nll(const MpvaaParams& params, const PatientViews& views, double lambda) {
  return nk::nll_rows_sum(forward(params, views, lambda).logits, views.sequence);
}

nk::Tensor next_position_logits(const MpvaaParams& params, const PatientViews& views,
                                double lambda) {
  const nk::Tensor logits = forward(params, views, lambda, true).logits;
  return nk::slice(logits, nk::Axis::rows, logits.rows() - 1, logits.rows());
}

PatientRepresentation patient_representation(const MpvaaParams& params, const PatientViews& views,
                                             double lambda) {
  if (params.encoders.empty() || !params.fusion.w_dem.defined()) {
    throw ContractError("patient_representation: model parameters are not initialized");
  }
  const EncodedViews enc = encode_views(params, views, lambda);
  const nk::Tensor fused = fuse_views(enc.pooled[0], enc.pooled[1], enc.pooled[2], params.fusion);
  PatientRepresentation rep;
  rep.fused.assign(fused.data().begin(), fused.data().end());
  rep.z_dem.assign(enc.pooled[0].data().begin(), enc.pooled[0].data().end());
  return rep;
}

}  // namespace mpvaa::net
