#include "mpvaa/graph/gae.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mpvaa/numkit/adam.hpp"
#include "mpvaa/numkit/ops.hpp"

namespace mpvaa::graph {

GaeParams init_gae_params(std::size_t features, const GaeConfig& config, nk::SeededRng& rng,
                          nk::Dtype dtype) {
  GaeParams p;
  p.w0 = nk::xavier_uniform(features, config.hidden(), rng, dtype);
  p.w1 = nk::xavier_uniform(config.hidden(), config.d_k, rng, dtype);
  return p;
}

GaeParams init_gae_params_keyed(std::span<const std::size_t> nodes, const GaeConfig& config,
                                std::uint64_t seed, nk::Dtype dtype) {
  const std::size_t hidden = config.hidden();
  const double bound =
      std::sqrt(6.0 / static_cast<double>(nodes.size() + hidden));
  std::vector<double> w0(nodes.size() * hidden);
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    nk::SeededRng row(nk::derive_seed(seed, nodes[r]));
    for (std::size_t j = 0; j < hidden; ++j) w0[r * hidden + j] = row.uniform(-bound, bound);
  }
  GaeParams p;
  p.w0 = nk::Tensor::from({nodes.size(), hidden}, std::move(w0), dtype, true);
  nk::SeededRng shared(nk::derive_seed(seed, ~std::uint64_t{0}));
  p.w1 = nk::xavier_uniform(hidden, config.d_k, shared, dtype);
  return p;
}

namespace {

nk::Tensor propagate(const nk::Tensor& ax, const nk::Tensor& a, const GaeParams& params) {
  nk::Tensor h = nk::relu(nk::matmul(ax, params.w0));
  return nk::softmax_rows(nk::matmul(a, nk::matmul(h, params.w1)));
}

nk::Tensor reconstruction_target(const nk::Tensor& adjacency, nk::Dtype dtype) {
  const std::size_t n = adjacency.rows();
  std::vector<double> t(adjacency.data().begin(), adjacency.data().end());
  for (std::size_t i = 0; i < n; ++i) t[i * n + i] = 1.0;
  return nk::Tensor::from({n, n}, std::move(t), dtype);
}

}  // namespace

nk::Tensor gcn_forward(const nk::Tensor& features, const nk::Tensor& norm_adjacency,
                       const GaeParams& params) {
  return propagate(nk::matmul(norm_adjacency, features), norm_adjacency, params);
}

nk::Tensor gae_reconstruction_loss(const nk::Tensor& z, const nk::Tensor& adjacency) {
  const nk::Tensor target = reconstruction_target(adjacency, z.dtype());
  double ones = 0.0;
  for (double v : target.data()) ones += v;
  const double zeros = static_cast<double>(target.numel()) - ones;
  const double pos_weight = zeros > 0.0 ? zeros / ones : 1.0;
  nk::Tensor logits = nk::matmul(z, nk::transpose(z));
  return nk::weighted_bce_with_logits(logits, target, pos_weight);
}

std::size_t InnerViewEmbedding::row_of(std::size_t concept_index) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), concept_index);
  if (it == nodes.end() || *it != concept_index) {
    throw LookupError("concept " + std::to_string(concept_index) + " has no " +
                      std::string(to_string(view)) + " embedding for this patient");
  }
  return static_cast<std::size_t>(it - nodes.begin());
}

GaeResult train_gae(const ViewGraph& graph, const GaeConfig& config, nk::SeededRng rng,
                    nk::Dtype dtype) {
  GaeParams params = config.keyed_init
                         ? init_gae_params_keyed(graph.nodes, config, rng.seed(), dtype)
                         : init_gae_params(graph.nodes.size(), config, rng, dtype);
  return train_gae(graph, config, std::move(params));
}

GaeResult train_gae(const ViewGraph& graph, const GaeConfig& config, GaeParams params) {
  const nk::Dtype dtype = params.w0.dtype();
  const std::size_t n = graph.nodes.size();
  if (graph.features.rows() != n || graph.features.cols() != params.w0.rows() ||
      graph.adjacency.rows() != n) {
    throw ShapeError("train_gae: graph and parameter shapes do not conform");
  }
  const nk::Tensor a_norm = normalize_adjacency(graph.adjacency).to(dtype);
  const nk::Tensor ax = nk::matmul(a_norm, graph.features.to(dtype));
  const nk::Tensor adjacency = graph.adjacency.to(dtype);

  std::vector<nk::Tensor> trainable = {params.w0, params.w1};
  nk::AdamState adam = nk::make_adam_state(trainable, {.lr = config.lr});

  GaeResult result;
  nk::GradTape tape;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    nk::TapeScope scope(tape);
    nk::Tensor loss = gae_reconstruction_loss(propagate(ax, a_norm, params), adjacency);
    if (epoch == 0) result.initial_loss = loss.item();
    nk::backward(loss);
    nk::adam_step(trainable, adam);
  }
  nk::Tensor z = propagate(ax, a_norm, params);
  result.final_loss = gae_reconstruction_loss(z, adjacency).item();
  if (config.epochs == 0) result.initial_loss = result.final_loss;
  result.embedding.view = graph.view;
  result.embedding.nodes = graph.nodes;
  result.embedding.z = z.detach();
  return result;
}

}  // namespace mpvaa::graph
