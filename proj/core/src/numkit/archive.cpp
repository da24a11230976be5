#include "mpvaa/numkit/archive.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace mpvaa::nk {

NamedArray to_named_array(std::string name, const Tensor& t) {
  NamedArray a;
  a.name = std::move(name);
  a.shape = t.shape();
  a.values.reserve(t.numel());
  for (double v : t.data()) a.values.push_back(static_cast<float>(v));
  return a;
}

Tensor to_tensor(const NamedArray& a, Dtype dtype, bool requires_grad) {
  std::vector<double> values(a.values.begin(), a.values.end());
  return Tensor::from(a.shape, std::move(values), dtype, requires_grad);
}

std::string encode_archive(const std::vector<NamedArray>& arrays) {
  std::string out = std::string(kArchiveMagic) + "\n";
  for (const auto& a : arrays) {
    if (a.name.empty() || a.name.find_first_of(" \t\n\r") != std::string::npos) {
      throw ContractError("archive array name must be non-empty without whitespace: '" +
                          a.name + "'");
    }
    if (shape_numel(a.shape) != a.values.size() || a.shape.empty()) {
      throw ShapeError("archive array '" + a.name + "' has inconsistent shape");
    }
    out += a.name + " f32 " + std::to_string(a.shape.size());
    for (auto d : a.shape) out += " " + std::to_string(d);
    out += "\n";
    for (float v : a.values) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  }
  return out;
}

std::vector<NamedArray> decode_archive(const std::string& bytes) {
  std::size_t pos = bytes.find('\n');
  if (pos == std::string::npos || bytes.substr(0, pos) != kArchiveMagic) {
    throw ParseError("archive: missing '" + std::string(kArchiveMagic) + "' header");
  }
  ++pos;
  std::vector<NamedArray> arrays;
  while (pos < bytes.size()) {
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) throw ParseError("archive: truncated array header");
    std::istringstream header(bytes.substr(pos, eol - pos));
    NamedArray a;
    std::string dtype;
    std::size_t rank = 0;
    if (!(header >> a.name >> dtype >> rank) || dtype != "f32" || rank == 0) {
      throw ParseError("archive: malformed array header at byte " + std::to_string(pos));
    }
    a.shape.resize(rank);
    for (auto& d : a.shape) {
      if (!(header >> d) || d == 0) {
        throw ParseError("archive: bad shape for array '" + a.name + "'");
      }
    }
    pos = eol + 1;
    const std::size_t n = shape_numel(a.shape);
    if (bytes.size() - pos < 4 * n) {
      throw ParseError("archive: truncated payload for array '" + a.name + "'");
    }
    a.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + 4 * i + b]))
                << (8 * b);
      }
      a.values[i] = std::bit_cast<float>(bits);
    }
    pos += 4 * n;
    arrays.push_back(std::move(a));
  }
  return arrays;
}

void write_archive(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  const std::string bytes = encode_archive(arrays);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<NamedArray> read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifactError("cannot open archive " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_archive(ss.str());
}

const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw ParseError("archive: no array named '" + name + "'");
}

}  // namespace mpvaa::nk
