#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mpvaa/numkit/tensor.hpp"

namespace mpvaa::nk {

// Named-array archive:
//
//   MPVAA-CKPT v1\n
//   <name> f32 <rank> <d0> ... <dn>\n<payload: numel little-endian float32>
//   ...
//
// Names are non-empty and contain no whitespace. Arrays appear in write order.
inline constexpr const char* kArchiveMagic = "MPVAA-CKPT v1";

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

NamedArray to_named_array(std::string name, const Tensor& t);
Tensor to_tensor(const NamedArray& a, Dtype dtype = Dtype::f32, bool requires_grad = false);

std::string encode_archive(const std::vector<NamedArray>& arrays);
std::vector<NamedArray> decode_archive(const std::string& bytes);

void write_archive(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_archive(const std::filesystem::path& path);

const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name);

}  // namespace mpvaa::nk
