#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mpvaa/numkit/tensor.hpp"

// Differentiable operations on rank-2 tensors. Every op checks operand shapes
// (ShapeError), rejects NaN/Inf in its result (NumericError) and registers an
// adjoint on the active tape when any input requires grad. Row vectors are
// [1 x n] matrices; rank-1 tensors are accepted wherever a single row is.
namespace mpvaa::nk {

enum class Axis : std::uint8_t { rows = 0, cols = 1 };

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// x[r, c] + bias[c]
Tensor add_bias(const Tensor& x, const Tensor& bias);
// x[r, c] * v[c]
Tensor mul_rowvec(const Tensor& x, const Tensor& v);

Tensor scale(const Tensor& x, double s);
// wa * a + wb * b
Tensor weighted_sum(const Tensor& a, double wa, const Tensor& b, double wb);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Numerically stable row softmax. With causal = true, entry (i, j) for j > i
// gets probability exactly zero (requires a square input).
Tensor softmax_rows(const Tensor& x, bool causal = false);

inline constexpr double kLayerNormEps = 1e-5;

// (x - mean) / sqrt(var + eps) per row.
Tensor normalize_rows(const Tensor& x, double eps = kLayerNormEps);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

Tensor transpose(const Tensor& x);
Tensor concat(std::span<const Tensor> parts, Axis axis);
// Half-open [begin, end) along axis.
Tensor slice(const Tensor& x, Axis axis, std::size_t begin, std::size_t end);

// Reducing over rows yields [1 x cols]; over cols yields [rows x 1].
Tensor reduce_mean(const Tensor& x, Axis axis);
Tensor reduce_max(const Tensor& x, Axis axis);
Tensor sum(const Tensor& x);

// out[i] = table[indices[i]]
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

// Sum over rows r of -log(max(softmax(logits[r])[targets[r]], floor)).
Tensor nll_rows_sum(const Tensor& logits, std::span<const std::size_t> targets,
                    double floor = 1e-12);

// Mean over entries of pos_weight * y * softplus(-x) + (1 - y) * softplus(x).
Tensor weighted_bce_with_logits(const Tensor& logits, const Tensor& targets,
                                double pos_weight);

}  // namespace mpvaa::nk
