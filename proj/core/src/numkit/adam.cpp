#include "mpvaa/numkit/adam.hpp"

#include <cmath>
#include <string>

namespace mpvaa::nk {

AdamState make_adam_state(std::span<const Tensor> params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const Tensor& p : params) {
    state.first_moment.emplace_back(p.numel(), 0.0);
    state.second_moment.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ContractError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (params[i].numel() != state.first_moment[i].size()) {
      throw ShapeError("adam_step: moment buffer shape differs from parameter " +
                       std::to_string(i));
    }
  }
  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto g = p.mutable_grad();
    auto w = p.mutable_data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p.canonicalize("adam_step");
    p.zero_grad();
  }
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, SeededRng& rng, Dtype dtype) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(fan_in * fan_out);
  for (auto& v : values) v = rng.uniform(-a, a);
  return Tensor::from({fan_in, fan_out}, std::move(values), dtype, true);
}

}  // namespace mpvaa::nk
