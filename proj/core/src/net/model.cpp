#include "mpvaa/net/model.hpp"

#include <sstream>

#include "mpvaa/ehr/dataset_io.hpp"
#include "mpvaa/errors.hpp"
#include "mpvaa/numkit/adam.hpp"
#include "mpvaa/numkit/archive.hpp"

namespace mpvaa::net {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full:
      return "full";
    case Variant::mmvaa:
      return "mmvaa";
    case Variant::vaa:
      return "vaa";
    case Variant::sin:
      return "sin";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

void HyperParams::validate() const {
  if (d_k == 0 || d_m == 0 || d_f == 0 || d_v == 0 || heads == 0 || vocab == 0) {
    throw ContractError("hyperparameters: every dimension must be >= 1");
  }
  if (d_m != d_k) {
    throw ContractError("hyperparameters: d_m must equal d_k for the encoder residual (d_k=" +
                        std::to_string(d_k) + ", d_m=" + std::to_string(d_m) + ")");
  }
  if (d_m % heads != 0 || d_v % heads != 0) {
    throw ContractError("hyperparameters: heads must divide d_m and d_v");
  }
  if (lambda_eval < 0.0 || lambda_eval > 1.0) {
    throw ContractError("hyperparameters: lambda_eval must lie in [0, 1]");
  }
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::size_t get_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ParseError("manifest: missing key '" + key + "'");
  try {
    return static_cast<std::size_t>(std::stoull(it->second));
  } catch (const std::exception&) {
    throw ParseError("manifest: key '" + key + "' is not an integer");
  }
}

}  // namespace

std::map<std::string, std::string> HyperParams::to_manifest() const {
  return {{"d_k", std::to_string(d_k)},
          {"d_m", std::to_string(d_m)},
          {"d_f", std::to_string(d_f)},
          {"d_v", std::to_string(d_v)},
          {"heads", std::to_string(heads)},
          {"vocab", std::to_string(vocab)},
          {"variant", std::string(to_string(variant))},
          {"shared_encoder", shared_encoder ? "true" : "false"},
          {"lambda_eval", fmt_double(lambda_eval)}};
}

HyperParams HyperParams::from_manifest(const std::map<std::string, std::string>& kv) {
  HyperParams hp;
  hp.d_k = get_size(kv, "d_k");
  hp.d_m = get_size(kv, "d_m");
  hp.d_f = get_size(kv, "d_f");
  hp.d_v = get_size(kv, "d_v");
  hp.heads = get_size(kv, "heads");
  hp.vocab = get_size(kv, "vocab");
  auto v = kv.find("variant");
  if (v == kv.end() || !parse_variant(v->second)) throw ParseError("manifest: bad 'variant'");
  hp.variant = *parse_variant(v->second);
  auto s = kv.find("shared_encoder");
  if (s == kv.end() || (s->second != "true" && s->second != "false")) {
    throw ParseError("manifest: bad 'shared_encoder'");
  }
  hp.shared_encoder = s->second == "true";
  auto l = kv.find("lambda_eval");
  if (l == kv.end()) throw ParseError("manifest: missing key 'lambda_eval'");
  hp.lambda_eval = std::stod(l->second);
  hp.validate();
  return hp;
}

const EncoderParams& MpvaaParams::encoder_for(graph::View view) const {
  if (encoders.size() == 1) return encoders.front();
  return encoders.at(static_cast<std::size_t>(view));
}

std::vector<std::pair<std::string, nk::Tensor>> MpvaaParams::named_parameters() const {
  std::vector<std::pair<std::string, nk::Tensor>> out;
  auto attention = [&](const std::string& p, const AttentionParams& a) {
    out.emplace_back(p + ".wq", a.wq);
    out.emplace_back(p + ".wk", a.wk);
    out.emplace_back(p + ".wv", a.wv);
    out.emplace_back(p + ".wo", a.wo);
  };
  auto norm = [&](const std::string& p, const NormParams& n) {
    out.emplace_back(p + ".gamma", n.gamma);
    out.emplace_back(p + ".beta", n.beta);
  };
  auto ff = [&](const std::string& p, const FeedForwardParams& f) {
    out.emplace_back(p + ".wa", f.wa);
    out.emplace_back(p + ".ba", f.ba);
    out.emplace_back(p + ".wb", f.wb);
    out.emplace_back(p + ".bb", f.bb);
  };
  for (std::size_t i = 0; i < encoders.size(); ++i) {
    const std::string p = encoders.size() == 1
                              ? std::string("encoder")
                              : "encoder_" + std::string(graph::to_string(graph::kViews[i]));
    attention(p + ".attention", encoders[i].attention);
    norm(p + ".attention_norm", encoders[i].attention_norm);
    ff(p + ".ff", encoders[i].ff);
    norm(p + ".ff_norm", encoders[i].ff_norm);
  }
  attention("decoder.self_attention", decoder.self_attention);
  norm("decoder.self_norm", decoder.self_norm);
  attention("decoder.view_attention", decoder.view_attention);
  norm("decoder.view_norm", decoder.view_norm);
  ff("decoder.ff", decoder.ff);
  norm("decoder.ff_norm", decoder.ff_norm);
  out.emplace_back("fusion.w_dem", fusion.w_dem);
  out.emplace_back("fusion.w_lab", fusion.w_lab);
  out.emplace_back("fusion.w_notes", fusion.w_notes);
  out.emplace_back("output.wp", output.wp);
  out.emplace_back("output.bp", output.bp);
  return out;
}

std::vector<nk::Tensor> MpvaaParams::parameters() const {
  std::vector<nk::Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t MpvaaParams::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

namespace {

NormParams init_norm(std::size_t d, nk::Dtype dtype) {
  return {nk::Tensor::full({1, d}, 1.0, dtype, true), nk::Tensor::zeros({1, d}, dtype, true)};
}

FeedForwardParams init_ff(const HyperParams& hp, nk::SeededRng& rng, nk::Dtype dtype) {
  FeedForwardParams f;
  f.wa = nk::xavier_uniform(hp.d_m, hp.d_f, rng, dtype);
  f.ba = nk::Tensor::zeros({1, hp.d_f}, dtype, true);
  f.wb = nk::xavier_uniform(hp.d_f, hp.d_m, rng, dtype);
  f.bb = nk::Tensor::zeros({1, hp.d_m}, dtype, true);
  return f;
}

}  // namespace

MpvaaParams init_mpvaa(const HyperParams& hp, nk::SeededRng& rng, nk::Dtype dtype) {
  hp.validate();
  MpvaaParams p;
  p.hp = hp;
  const std::size_t encoder_count = hp.shared_encoder ? 1 : 3;
  for (std::size_t i = 0; i < encoder_count; ++i) {
    EncoderParams e;
    e.attention = init_attention(hp.d_k, hp.d_m, hp.d_v, rng, dtype);
    e.attention_norm = init_norm(hp.d_m, dtype);
    e.ff = init_ff(hp, rng, dtype);
    e.ff_norm = init_norm(hp.d_m, dtype);
    p.encoders.push_back(std::move(e));
  }
  p.decoder.self_attention = init_attention(hp.d_k, hp.d_m, hp.d_v, rng, dtype);
  p.decoder.self_norm = init_norm(hp.d_m, dtype);
  p.decoder.view_attention = init_attention(hp.d_m, hp.d_m, hp.d_v, rng, dtype);
  p.decoder.view_norm = init_norm(hp.d_m, dtype);
  p.decoder.ff = init_ff(hp, rng, dtype);
  p.decoder.ff_norm = init_norm(hp.d_m, dtype);
  p.fusion.w_dem = nk::xavier_uniform(hp.pooled_dim(), hp.d_m, rng, dtype);
  p.fusion.w_lab = nk::xavier_uniform(hp.pooled_dim(), hp.d_m, rng, dtype);
  p.fusion.w_notes = nk::xavier_uniform(hp.pooled_dim(), hp.d_m, rng, dtype);
  p.output.wp = nk::xavier_uniform(hp.d_m, hp.vocab, rng, dtype);
  p.output.bp = nk::Tensor::zeros({1, hp.vocab}, dtype, true);
  return p;
}

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& source) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(source + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string format_key_values(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void save_model(const MpvaaParams& params, const std::filesystem::path& dir,
                const std::map<std::string, std::string>& extra_manifest) {
  std::filesystem::create_directories(dir);
  std::vector<nk::NamedArray> arrays;
  for (const auto& [name, t] : params.named_parameters()) {
    arrays.push_back(nk::to_named_array(name, t));
  }
  nk::write_archive(dir / kModelArchive, arrays);
  auto manifest = params.hp.to_manifest();
  manifest["format"] = "MPVAA-MODEL v1";
  for (const auto& [k, v] : extra_manifest) manifest[k] = v;
  ehr::write_text_file(dir / kModelManifest, format_key_values(manifest));
}

MpvaaParams load_model(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / kModelArchive) ||
      !std::filesystem::exists(dir / kModelManifest)) {
    throw MissingArtifactError("no trained model in '" + dir.string() +
                               "'; run the `train` subcommand first");
  }
  const auto manifest =
      parse_key_values(ehr::read_text_file(dir / kModelManifest), kModelManifest);
  const HyperParams hp = HyperParams::from_manifest(manifest);
  nk::SeededRng rng(0);
  MpvaaParams params = init_mpvaa(hp, rng, nk::Dtype::f32);
  const auto arrays = nk::read_archive(dir / kModelArchive);
  for (auto& [name, t] : params.named_parameters()) {
    const nk::NamedArray& a = nk::find_array(arrays, name);
    if (a.shape != t.shape()) {
      throw ParseError("model.ckpt: array '" + name + "' has shape " + nk::shape_str(a.shape) +
                       ", expected " + nk::shape_str(t.shape()));
    }
    nk::Tensor target = t;
    auto dst = target.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(a.values[i]);
  }
  return params;
}

}  // namespace mpvaa::net
