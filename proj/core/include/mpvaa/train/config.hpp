#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "mpvaa/graph/gae.hpp"
#include "mpvaa/net/model.hpp"

namespace mpvaa::train {

// Config file: one `key = value` per line, `#` starts a comment.
//
//   batch_size, learning_rate, epochs, seed, dataset, checkpoint_dir,
//   d_k, d_m, d_f, d_v, heads, variant, shared_encoder, lambda_eval,
//   gae_epochs, gae_lr, gae_hidden, gae_keyed_init
//
// The output vocabulary size comes from the dataset, not the file.
struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  net::HyperParams hp;
  graph::GaeConfig gae;
  std::filesystem::path dataset;
  std::filesystem::path checkpoint_dir;

  // ContractError for batch_size 0, non-positive rates or invalid dims.
  void validate() const;

  std::map<std::string, std::string> to_key_values() const;
  // Keys absent from `kv` keep their current value; unknown keys are a ParseError.
  void apply(const std::map<std::string, std::string>& kv, const std::string& source);
  static TrainConfig from_key_values(const std::map<std::string, std::string>& kv,
                                     const std::string& source = "config");
};

// Desk-scale defaults: d_k = d_m = 32, heads 4, 20 epochs.
TrainConfig smoke_config();
// Full-scale setting: minibatch 64, lr 0.001, 5 heads, 500-dim representation.
TrainConfig full_scale_config();

std::string serialize_config(const TrainConfig& config);
TrainConfig parse_config(const std::string& text, const std::string& source = "config");
TrainConfig load_config(const std::filesystem::path& path);
void save_config(const TrainConfig& config, const std::filesystem::path& path);

}  // namespace mpvaa::train
