#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mpvaa/graph/view_graph.hpp"
#include "mpvaa/net/attention.hpp"
#include "mpvaa/numkit/rng.hpp"
#include "mpvaa/numkit/tensor.hpp"

namespace mpvaa::net {

// full   stochastic mixed pooling, no positions
// mmvaa  deterministic mean-max pooling: z = [max ; mean], fusion weights 2 d_m x d_m
// vaa    no mixed pooling: z = mean over time
// sin    full + sinusoidal positional encodings on the input embeddings
enum class Variant { full, mmvaa, vaa, sin };
inline constexpr Variant kAllVariants[] = {Variant::full, Variant::mmvaa, Variant::vaa,
                                           Variant::sin};
std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);

struct HyperParams {
  std::size_t d_k = 32;
  std::size_t d_m = 32;
  std::size_t d_f = 64;
  std::size_t d_v = 32;
  std::size_t heads = 4;
  std::size_t vocab = 0;  // output vocabulary N
  Variant variant = Variant::full;
  bool shared_encoder = true;
  double lambda_eval = 0.5;

  // ContractError unless all dims >= 1, d_m == d_k, heads divides d_m and d_v.
  void validate() const;
  std::size_t pooled_dim() const { return variant == Variant::mmvaa ? 2 * d_m : d_m; }
  bool uses_positions() const { return variant == Variant::sin; }
  bool samples_lambda() const { return variant == Variant::full || variant == Variant::sin; }

  std::map<std::string, std::string> to_manifest() const;
  static HyperParams from_manifest(const std::map<std::string, std::string>& kv);
};

struct NormParams {
  nk::Tensor gamma;  // 1 x d
  nk::Tensor beta;   // 1 x d
};

struct FeedForwardParams {
  nk::Tensor wa;  // d_m x d_f
  nk::Tensor ba;  // 1 x d_f
  nk::Tensor wb;  // d_f x d_m
  nk::Tensor bb;  // 1 x d_m
};

struct EncoderParams {
  AttentionParams attention;
  NormParams attention_norm;
  FeedForwardParams ff;
  NormParams ff_norm;
};

struct DecoderParams {
  AttentionParams self_attention;
  NormParams self_norm;
  AttentionParams view_attention;
  NormParams view_norm;
  FeedForwardParams ff;
  NormParams ff_norm;
};

struct FusionParams {
  nk::Tensor w_dem;    // pooled_dim x d_m
  nk::Tensor w_lab;    // pooled_dim x d_m
  nk::Tensor w_notes;  // pooled_dim x d_m
};

struct OutputParams {
  nk::Tensor wp;  // d_m x N
  nk::Tensor bp;  // 1 x N
};

struct MpvaaParams {
  HyperParams hp;
  std::vector<EncoderParams> encoders;  // one when shared, else dem/lab/notes
  DecoderParams decoder;
  FusionParams fusion;
  OutputParams output;

  const EncoderParams& encoder_for(graph::View view) const;
  // Stable order; names are used as checkpoint array names.
  std::vector<std::pair<std::string, nk::Tensor>> named_parameters() const;
  std::vector<nk::Tensor> parameters() const;
  std::size_t parameter_count() const;
};

// Xavier-uniform weights, zero biases, unit layer-norm gains.
MpvaaParams init_mpvaa(const HyperParams& hp, nk::SeededRng& rng,
                       nk::Dtype dtype = nk::Dtype::f32);

inline constexpr const char* kModelArchive = "model.ckpt";
inline constexpr const char* kModelManifest = "manifest.txt";

// Writes model.ckpt (named-array archive) and manifest.txt (HyperParams as
// key=value lines) into `dir`.
void save_model(const MpvaaParams& params, const std::filesystem::path& dir,
                const std::map<std::string, std::string>& extra_manifest = {});
MpvaaParams load_model(const std::filesystem::path& dir);

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& source);
std::string format_key_values(const std::map<std::string, std::string>& kv);

}  // namespace mpvaa::net
