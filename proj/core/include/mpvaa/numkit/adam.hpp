#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mpvaa/numkit/rng.hpp"
#include "mpvaa/numkit/tensor.hpp"

namespace mpvaa::nk {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

AdamState make_adam_state(std::span<const Tensor> params, AdamConfig config = {});

// One bias-corrected Adam update. Every parameter must carry a gradient
// buffer (ContractError otherwise); gradients are zeroed afterwards.
void adam_step(std::span<Tensor> params, AdamState& state);

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)) for a [fan_in x fan_out] matrix.
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, SeededRng& rng,
                      Dtype dtype = Dtype::f32);

}  // namespace mpvaa::nk
