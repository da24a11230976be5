#include "mpvaa/net/attention.hpp"

#include <cmath>
#include <string>

#include "mpvaa/numkit/adam.hpp"
#include "mpvaa/numkit/ops.hpp"

namespace mpvaa::net {

AttentionParams init_attention(std::size_t d_in, std::size_t d_m, std::size_t d_v,
                               nk::SeededRng& rng, nk::Dtype dtype) {
  AttentionParams p;
  p.wq = nk::xavier_uniform(d_in, d_m, rng, dtype);
  p.wk = nk::xavier_uniform(d_in, d_m, rng, dtype);
  p.wv = nk::xavier_uniform(d_in, d_v, rng, dtype);
  p.wo = nk::xavier_uniform(d_v, d_m, rng, dtype);
  return p;
}

nk::Tensor multi_head_attention(const nk::Tensor& query, const nk::Tensor& key,
                                const nk::Tensor& value, const AttentionParams& params,
                                std::size_t heads, bool causal, std::vector<nk::Tensor>* weights) {
  const std::size_t d_m = params.wq.cols();
  const std::size_t d_v = params.wv.cols();
  if (heads == 0 || d_m % heads != 0 || d_v % heads != 0) {
    throw ShapeError("multi_head_attention: " + std::to_string(heads) +
                     " heads do not divide d_m=" + std::to_string(d_m) +
                     " and d_v=" + std::to_string(d_v));
  }
  if (key.rows() != value.rows()) {
    throw ShapeError("multi_head_attention: key and value row counts differ");
  }
  if (causal && query.rows() != key.rows()) {
    throw ShapeError("multi_head_attention: causal attention needs equal query/key lengths");
  }
  const nk::Tensor q = nk::matmul(query, params.wq);
  const nk::Tensor k = nk::matmul(key, params.wk);
  const nk::Tensor v = nk::matmul(value, params.wv);
  const std::size_t dq = d_m / heads;
  const std::size_t dv = d_v / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dq));

  std::vector<nk::Tensor> outputs;
  outputs.reserve(heads);
  if (weights) weights->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const nk::Tensor qh = nk::slice(q, nk::Axis::cols, h * dq, (h + 1) * dq);
    const nk::Tensor kh = nk::slice(k, nk::Axis::cols, h * dq, (h + 1) * dq);
    const nk::Tensor vh = nk::slice(v, nk::Axis::cols, h * dv, (h + 1) * dv);
    const nk::Tensor scores = nk::scale(nk::matmul(qh, nk::transpose(kh)), inv_scale);
    const nk::Tensor attn = nk::softmax_rows(scores, causal);
    if (weights) weights->push_back(attn);
    outputs.push_back(nk::matmul(attn, vh));
  }
  const nk::Tensor merged = heads == 1 ? outputs.front() : nk::concat(outputs, nk::Axis::cols);
  return nk::matmul(merged, params.wo);
}

}  // namespace mpvaa::net
