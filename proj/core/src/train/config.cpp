#include "mpvaa/train/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "mpvaa/ehr/dataset_io.hpp"
#include "mpvaa/errors.hpp"

namespace mpvaa::train {
namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::uint64_t parse_u64(const std::string& key, const std::string& value,
                        const std::string& source) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ParseError(source + ": key '" + key + "' expects a non-negative integer, got '" +
                     value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value, const std::string& source) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used == value.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(source + ": key '" + key + "' expects a number, got '" + value + "'");
}

bool parse_bool(const std::string& key, const std::string& value, const std::string& source) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ParseError(source + ": key '" + key + "' expects true/false, got '" + value + "'");
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ContractError("config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ContractError("config: learning_rate must be > 0");
  if (!(gae.lr > 0.0)) throw ContractError("config: gae_lr must be > 0");
  if (gae.d_k != hp.d_k) {
    throw ContractError("config: GAE output width must equal d_k");
  }
  net::HyperParams check = hp;
  if (check.vocab == 0) check.vocab = 1;
  check.validate();
}

std::map<std::string, std::string> TrainConfig::to_key_values() const {
  return {{"batch_size", std::to_string(batch_size)},
          {"learning_rate", fmt_double(learning_rate)},
          {"epochs", std::to_string(epochs)},
          {"seed", std::to_string(seed)},
          {"dataset", dataset.string()},
          {"checkpoint_dir", checkpoint_dir.string()},
          {"d_k", std::to_string(hp.d_k)},
          {"d_m", std::to_string(hp.d_m)},
          {"d_f", std::to_string(hp.d_f)},
          {"d_v", std::to_string(hp.d_v)},
          {"heads", std::to_string(hp.heads)},
          {"variant", std::string(net::to_string(hp.variant))},
          {"shared_encoder", hp.shared_encoder ? "true" : "false"},
          {"lambda_eval", fmt_double(hp.lambda_eval)},
          {"gae_epochs", std::to_string(gae.epochs)},
          {"gae_lr", fmt_double(gae.lr)},
          {"gae_hidden", std::to_string(gae.d_hidden)},
          {"gae_keyed_init", gae.keyed_init ? "true" : "false"}};
}

void TrainConfig::apply(const std::map<std::string, std::string>& kv, const std::string& source) {
  for (const auto& [key, value] : kv) {
    if (key == "batch_size") {
      batch_size = parse_u64(key, value, source);
    } else if (key == "learning_rate") {
      learning_rate = parse_double(key, value, source);
    } else if (key == "epochs") {
      epochs = parse_u64(key, value, source);
    } else if (key == "seed") {
      seed = parse_u64(key, value, source);
    } else if (key == "dataset") {
      dataset = value;
    } else if (key == "checkpoint_dir") {
      checkpoint_dir = value;
    } else if (key == "d_k") {
      hp.d_k = parse_u64(key, value, source);
      gae.d_k = hp.d_k;
    } else if (key == "d_m") {
      hp.d_m = parse_u64(key, value, source);
    } else if (key == "d_f") {
      hp.d_f = parse_u64(key, value, source);
    } else if (key == "d_v") {
      hp.d_v = parse_u64(key, value, source);
    } else if (key == "heads") {
      hp.heads = parse_u64(key, value, source);
    } else if (key == "variant") {
      auto v = net::parse_variant(value);
      if (!v) throw ParseError(source + ": unknown variant '" + value + "'");
      hp.variant = *v;
    } else if (key == "shared_encoder") {
      hp.shared_encoder = parse_bool(key, value, source);
    } else if (key == "lambda_eval") {
      hp.lambda_eval = parse_double(key, value, source);
    } else if (key == "gae_epochs") {
      gae.epochs = parse_u64(key, value, source);
    } else if (key == "gae_lr") {
      gae.lr = parse_double(key, value, source);
    } else if (key == "gae_hidden") {
      gae.d_hidden = parse_u64(key, value, source);
    } else if (key == "gae_keyed_init") {
      gae.keyed_init = parse_bool(key, value, source);
    } else {
      throw ParseError(source + ": unknown key '" + key + "'");
    }
  }
}

TrainConfig TrainConfig::from_key_values(const std::map<std::string, std::string>& kv,
                                         const std::string& source) {
  TrainConfig cfg;
  cfg.apply(kv, source);
  return cfg;
}

TrainConfig smoke_config() {
  TrainConfig cfg;
  cfg.hp.d_k = cfg.hp.d_m = cfg.hp.d_v = 32;
  cfg.hp.d_f = 64;
  cfg.hp.heads = 4;
  cfg.gae.d_k = 32;
  cfg.epochs = 20;
  return cfg;
}

TrainConfig full_scale_config() {
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.learning_rate = 0.001;
  cfg.hp.d_k = cfg.hp.d_m = cfg.hp.d_v = 500;
  cfg.hp.d_f = 1000;
  cfg.hp.heads = 5;
  cfg.gae.d_k = 500;
  return cfg;
}

std::string serialize_config(const TrainConfig& config) {
  return net::format_key_values(config.to_key_values());
}

TrainConfig parse_config(const std::string& text, const std::string& source) {
  return TrainConfig::from_key_values(net::parse_key_values(text, source), source);
}

TrainConfig load_config(const std::filesystem::path& path) {
  return parse_config(ehr::read_text_file(path), path.filename().string());
}

void save_config(const TrainConfig& config, const std::filesystem::path& path) {
  ehr::write_text_file(path, serialize_config(config));
}

}  // namespace mpvaa::train
