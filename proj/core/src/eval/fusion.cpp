#include "mpvaa/eval/fusion.hpp"

#include <cmath>

#include "mpvaa/errors.hpp"
#include "mpvaa/numkit/ops.hpp"

namespace mpvaa::eval {

std::string_view to_string(FusionMethod m) { return m == FusionMethod::concat ? "concat" : "avg"; }

std::optional<FusionMethod> parse_fusion(std::string_view s) {
  if (s == "concat") return FusionMethod::concat;
  if (s == "avg") return FusionMethod::avg;
  return std::nullopt;
}

nk::Tensor l2_normalize_rows(const nk::Tensor& z) {
  nk::Tensor out = z.detach().to(nk::Dtype::f64);
  const std::size_t c = out.cols();
  auto d = out.mutable_data();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double norm = 0.0;
    for (std::size_t j = 0; j < c; ++j) norm += d[r * c + j] * d[r * c + j];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t j = 0; j < c; ++j) d[r * c + j] /= norm;
  }
  return out;
}

nk::Tensor baseline_fuse(FusionMethod method, const nk::Tensor& z_dem, const nk::Tensor& z_lab,
                         const nk::Tensor& z_notes) {
  if (z_dem.shape() != z_lab.shape() || z_dem.shape() != z_notes.shape()) {
    throw ShapeError("baseline_fuse: the three views must share a node set and width");
  }
  const nk::Tensor parts[] = {l2_normalize_rows(z_dem), l2_normalize_rows(z_lab),
                              l2_normalize_rows(z_notes)};
  if (method == FusionMethod::concat) return nk::concat(parts, nk::Axis::cols);
  return nk::scale(nk::add(nk::add(parts[0], parts[1]), parts[2]), 1.0 / 3.0);
}

std::vector<double> baseline_patient_vector(FusionMethod method, const train::ViewEmbeddings& views,
                                            std::span<const std::size_t> sequence) {
  if (sequence.empty()) throw ContractError("baseline_patient_vector: empty sequence");
  const nk::Tensor fused = baseline_fuse(method, views[0].z, views[1].z, views[2].z);
  const std::size_t c = fused.cols();
  std::vector<double> out(c, 0.0);
  for (std::size_t concept_index : sequence) {
    const std::size_t r = views[0].row_of(concept_index);
    for (std::size_t j = 0; j < c; ++j) out[j] += fused.at(r, j);
  }
  for (double& v : out) v /= static_cast<double>(sequence.size());
  return out;
}

}  // namespace mpvaa::eval
