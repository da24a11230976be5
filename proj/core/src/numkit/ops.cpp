#include "mpvaa/numkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mpvaa::nk {
namespace {

Dtype promote(std::initializer_list<const Tensor*> inputs) {
  for (const Tensor* t : inputs) {
    if (t->dtype() == Dtype::f64) return Dtype::f64;
  }
  return Dtype::f32;
}

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (GradTape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

struct Rows {
  std::size_t r;
  std::size_t c;
};

Rows matrix_dims(const Tensor& t, const char* op) {
  if (t.rank() > 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
  }
  return {t.rows(), t.cols()};
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.numel() != b.numel() || a.rows() != b.rows()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_finite(const Tensor& t, const char* op) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

Tensor make_out(Shape shape, Dtype dtype, bool track) {
  return Tensor::zeros(std::move(shape), dtype, track);
}

void finish(Tensor& out, const char* op) { out.canonicalize(op); }

template <typename Fn>
void record(bool track, Fn&& fn) {
  if (track) GradTape::active()->record(std::forward<Fn>(fn));
}

// Elementwise unary op with derivative expressed through (x, y).
template <typename F, typename D>
Tensor unary(const Tensor& x, const char* op, F f, D dfdx) {
  const bool track = tracking({&x});
  Tensor out = make_out(x.shape(), x.dtype(), track);
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < xd.size(); ++i) od[i] = f(xd[i]);
  finish(out, op);
  record(track, [x, out, dfdx]() mutable {
    if (!out.has_grad() || !x.requires_grad()) return;
    auto g = out.grad();
    auto xd = x.data();
    auto yd = out.data();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xd[i], yd[i]);
  });
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto [m, k] = matrix_dims(a, "matmul");
  const auto [k2, n] = matrix_dims(b, "matmul");
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const bool track = tracking({&a, &b});
  Tensor out = make_out({m, n}, promote({&a, &b}), track);
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = od.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  finish(out, "matmul");
  record(track, [a, b, out, m, k, n]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (a.requires_grad()) {
      auto bd = b.data();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bd[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (b.requires_grad()) {
      auto ad = a.data();
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = ad[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
      }
    }
  });
  return out;
}

Tensor weighted_sum(const Tensor& a, double wa, const Tensor& b, double wb) {
  require_same_shape(a, b, "weighted_sum");
  const bool track = tracking({&a, &b});
  Tensor out = make_out(a.shape(), promote({&a, &b}), track);
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = wa * ad[i] + wb * bd[i];
  finish(out, "weighted_sum");
  record(track, [a, b, out, wa, wb]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += wa * g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += wb * g[i];
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return weighted_sum(a, 1.0, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return weighted_sum(a, 1.0, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const bool track = tracking({&a, &b});
  Tensor out = make_out(a.shape(), promote({&a, &b}), track);
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
  finish(out, "mul");
  record(track, [a, b, out]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (a.requires_grad()) {
      auto bd = b.data();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i];
    }
    if (b.requires_grad()) {
      auto ad = a.data();
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad[i];
    }
  });
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const auto [r, c] = matrix_dims(x, "add_bias");
  if (bias.rows() != 1 || bias.cols() != c) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                     shape_str(x.shape()));
  }
  const bool track = tracking({&x, &bias});
  Tensor out = make_out(x.shape(), promote({&x, &bias}), track);
  auto xd = x.data();
  auto bd = bias.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) od[i * c + j] = xd[i * c + j] + bd[j];
  }
  finish(out, "add_bias");
  record(track, [x, bias, out, r, c]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (x.requires_grad()) {
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (bias.requires_grad()) {
      auto gb = bias.mutable_grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
      }
    }
  });
  return out;
}

Tensor mul_rowvec(const Tensor& x, const Tensor& v) {
  const auto [r, c] = matrix_dims(x, "mul_rowvec");
  if (v.rows() != 1 || v.cols() != c) {
    throw ShapeError("mul_rowvec: vector " + shape_str(v.shape()) + " does not match " +
                     shape_str(x.shape()));
  }
  const bool track = tracking({&x, &v});
  Tensor out = make_out(x.shape(), promote({&x, &v}), track);
  auto xd = x.data();
  auto vd = v.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) od[i * c + j] = xd[i * c + j] * vd[j];
  }
  finish(out, "mul_rowvec");
  record(track, [x, v, out, r, c]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (x.requires_grad()) {
      auto vd = v.data();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[i * c + j] * vd[j];
      }
    }
    if (v.requires_grad()) {
      auto xd = x.data();
      auto gv = v.mutable_grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gv[j] += g[i * c + j] * xd[i * c + j];
      }
    }
  });
  return out;
}

Tensor scale(const Tensor& x, double s) {
  return unary(
      x, "scale", [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax_rows(const Tensor& x, bool causal) {
  const auto [r, c] = matrix_dims(x, "softmax_rows");
  if (causal && r != c) {
    throw ShapeError("softmax_rows: causal mask needs a square input, got " +
                     shape_str(x.shape()));
  }
  require_finite(x, "softmax_rows");
  const bool track = tracking({&x});
  Tensor out = make_out(x.shape(), x.dtype(), track);
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t width = causal ? i + 1 : c;
    const double* row = xd.data() + i * c;
    double* orow = od.data() + i * c;
    const double mx = *std::max_element(row, row + width);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      orow[j] = std::exp(row[j] - mx);
      z += orow[j];
    }
    for (std::size_t j = 0; j < width; ++j) orow[j] /= z;
  }
  finish(out, "softmax_rows");
  record(track, [x, out, r, c]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto y = out.data();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
  return out;
}

Tensor normalize_rows(const Tensor& x, double eps) {
  const auto [r, c] = matrix_dims(x, "normalize_rows");
  require_finite(x, "normalize_rows");
  const bool track = tracking({&x});
  Tensor out = make_out(x.shape(), x.dtype(), track);
  std::vector<double> inv_std(r);
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xd.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) od[i * c + j] = (row[j] - mean) * inv_std[i];
  }
  finish(out, "normalize_rows");
  record(track, [x, out, r, c, inv_std = std::move(inv_std)]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto y = out.data();
    auto gx = x.mutable_grad();
    const double n = static_cast<double>(c);
    for (std::size_t i = 0; i < r; ++i) {
      double gmean = 0.0;
      double gy = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        gmean += g[i * c + j];
        gy += g[i * c + j] * y[i * c + j];
      }
      gmean /= n;
      gy /= n;
      for (std::size_t j = 0; j < c; ++j) {
        gx[i * c + j] += inv_std[i] * (g[i * c + j] - gmean - y[i * c + j] * gy);
      }
    }
  });
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  return add_bias(mul_rowvec(normalize_rows(x, eps), gamma), beta);
}

Tensor transpose(const Tensor& x) {
  const auto [r, c] = matrix_dims(x, "transpose");
  const bool track = tracking({&x});
  Tensor out = make_out({c, r}, x.dtype(), track);
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) od[j * r + i] = xd[i * c + j];
  }
  finish(out, "transpose");
  record(track, [x, out, r, c]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    }
  });
  return out;
}

Tensor concat(std::span<const Tensor> parts, Axis axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool track = false;
  Dtype dtype = Dtype::f32;
  for (const Tensor& p : parts) {
    const auto [r, c] = matrix_dims(p, "concat");
    if (axis == Axis::rows) {
      if (cols != 0 && c != cols) throw ShapeError("concat: column counts differ");
      cols = c;
      rows += r;
    } else {
      if (rows != 0 && r != rows) throw ShapeError("concat: row counts differ");
      rows = r;
      cols += c;
    }
    track = track || tracking({&p});
    if (p.dtype() == Dtype::f64) dtype = Dtype::f64;
  }
  Tensor out = make_out({rows, cols}, dtype, track);
  auto od = out.mutable_data();
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t r = p.rows();
    const std::size_t c = p.cols();
    auto pd = p.data();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        if (axis == Axis::rows) {
          od[(offset + i) * cols + j] = pd[i * c + j];
        } else {
          od[i * cols + offset + j] = pd[i * c + j];
        }
      }
    }
    offset += axis == Axis::rows ? r : c;
  }
  finish(out, "concat");
  record(track, [parts = std::vector<Tensor>(parts.begin(), parts.end()), out, axis,
                 cols]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    std::size_t offset = 0;
    for (Tensor& p : parts) {
      const std::size_t r = p.rows();
      const std::size_t c = p.cols();
      if (p.requires_grad()) {
        auto gp = p.mutable_grad();
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            gp[i * c + j] += axis == Axis::rows ? g[(offset + i) * cols + j]
                                                : g[i * cols + offset + j];
          }
        }
      }
      offset += axis == Axis::rows ? r : c;
    }
  });
  return out;
}

Tensor slice(const Tensor& x, Axis axis, std::size_t begin, std::size_t end) {
  const auto [r, c] = matrix_dims(x, "slice");
  const std::size_t extent = axis == Axis::rows ? r : c;
  if (begin >= end || end > extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + shape_str(x.shape()));
  }
  const std::size_t orows = axis == Axis::rows ? end - begin : r;
  const std::size_t ocols = axis == Axis::cols ? end - begin : c;
  const bool track = tracking({&x});
  Tensor out = make_out({orows, ocols}, x.dtype(), track);
  auto xd = x.data();
  auto od = out.mutable_data();
  const std::size_t r0 = axis == Axis::rows ? begin : 0;
  const std::size_t c0 = axis == Axis::cols ? begin : 0;
  for (std::size_t i = 0; i < orows; ++i) {
    for (std::size_t j = 0; j < ocols; ++j) od[i * ocols + j] = xd[(r0 + i) * c + c0 + j];
  }
  finish(out, "slice");
  record(track, [x, out, orows, ocols, r0, c0, c]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < orows; ++i) {
      for (std::size_t j = 0; j < ocols; ++j) gx[(r0 + i) * c + c0 + j] += g[i * ocols + j];
    }
  });
  return out;
}

Tensor reduce_mean(const Tensor& x, Axis axis) {
  const auto [r, c] = matrix_dims(x, "reduce_mean");
  const bool track = tracking({&x});
  const bool over_rows = axis == Axis::rows;
  Tensor out = make_out(over_rows ? Shape{1, c} : Shape{r, 1}, x.dtype(), track);
  auto xd = x.data();
  auto od = out.mutable_data();
  const double n = static_cast<double>(over_rows ? r : c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) od[over_rows ? j : i] += xd[i * c + j];
  }
  for (auto& v : od) v /= n;
  finish(out, "reduce_mean");
  record(track, [x, out, r, c, over_rows, n]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[over_rows ? j : i] / n;
    }
  });
  return out;
}

Tensor reduce_max(const Tensor& x, Axis axis) {
  const auto [r, c] = matrix_dims(x, "reduce_max");
  const bool track = tracking({&x});
  const bool over_rows = axis == Axis::rows;
  const std::size_t outer = over_rows ? c : r;
  const std::size_t inner = over_rows ? r : c;
  Tensor out = make_out(over_rows ? Shape{1, c} : Shape{r, 1}, x.dtype(), track);
  std::vector<std::size_t> argmax(outer);
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t best = over_rows ? o : o * c;
    for (std::size_t k = 1; k < inner; ++k) {
      const std::size_t idx = over_rows ? k * c + o : o * c + k;
      if (xd[idx] > xd[best]) best = idx;
    }
    argmax[o] = best;
    od[o] = xd[best];
  }
  finish(out, "reduce_max");
  record(track, [x, out, argmax = std::move(argmax)]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += g[o];
  });
  return out;
}

Tensor sum(const Tensor& x) {
  const bool track = tracking({&x});
  Tensor out = make_out({1}, x.dtype(), track);
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out.mutable_data()[0] = acc;
  finish(out, "sum");
  record(track, [x, out]() mutable {
    if (!out.has_grad()) return;
    const double g = out.grad()[0];
    for (auto& v : x.mutable_grad()) v += g;
  });
  return out;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  const auto [r, c] = matrix_dims(table, "gather_rows");
  if (indices.empty()) throw ShapeError("gather_rows: no indices");
  for (auto idx : indices) {
    if (idx >= r) {
      throw ShapeError("gather_rows: index " + std::to_string(idx) + " out of range for " +
                       shape_str(table.shape()));
    }
  }
  const bool track = tracking({&table});
  const std::size_t n = indices.size();
  Tensor out = make_out({n, c}, table.dtype(), track);
  auto td = table.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(td.data() + indices[i] * c, c, od.data() + i * c);
  }
  finish(out, "gather_rows");
  record(track, [table, out, idx = std::vector<std::size_t>(indices.begin(), indices.end()),
                 c]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto gt = table.mutable_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < c; ++j) gt[idx[i] * c + j] += g[i * c + j];
    }
  });
  return out;
}

Tensor nll_rows_sum(const Tensor& logits, std::span<const std::size_t> targets, double floor) {
  const auto [r, c] = matrix_dims(logits, "nll_rows_sum");
  if (targets.size() != r) {
    throw ShapeError("nll_rows_sum: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(r) + " rows");
  }
  require_finite(logits, "nll_rows_sum");
  const bool track = tracking({&logits});
  const double log_floor = std::log(floor);
  std::vector<double> probs(r * c);
  std::vector<char> clamped(r, 0);
  auto ld = logits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (targets[i] >= c) throw ShapeError("nll_rows_sum: target index out of range");
    const double* row = ld.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      z += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    double logp = row[targets[i]] - mx - std::log(z);
    if (logp < log_floor) {
      logp = log_floor;
      clamped[i] = 1;
    }
    total -= logp;
  }
  Tensor out = make_out({1}, logits.dtype(), track);
  out.mutable_data()[0] = total;
  finish(out, "nll_rows_sum");
  record(track, [logits, out, probs = std::move(probs), clamped = std::move(clamped),
                 tgt = std::vector<std::size_t>(targets.begin(), targets.end()), r,
                 c]() mutable {
    if (!out.has_grad()) return;
    const double g = out.grad()[0];
    auto gl = logits.mutable_grad();
    for (std::size_t i = 0; i < r; ++i) {
      if (clamped[i]) continue;
      for (std::size_t j = 0; j < c; ++j) {
        const double onehot = j == tgt[i] ? 1.0 : 0.0;
        gl[i * c + j] += g * (probs[i * c + j] - onehot);
      }
    }
  });
  return out;
}

Tensor weighted_bce_with_logits(const Tensor& logits, const Tensor& targets, double pos_weight) {
  require_same_shape(logits, targets, "weighted_bce_with_logits");
  require_finite(logits, "weighted_bce_with_logits");
  const bool track = tracking({&logits});
  auto softplus = [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
  auto xd = logits.data();
  auto yd = targets.data();
  const double n = static_cast<double>(xd.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xd.size(); ++i) {
    total += pos_weight * yd[i] * softplus(-xd[i]) + (1.0 - yd[i]) * softplus(xd[i]);
  }
  Tensor out = make_out({1}, promote({&logits, &targets}), track);
  out.mutable_data()[0] = total / n;
  finish(out, "weighted_bce_with_logits");
  record(track, [logits, targets, out, pos_weight, n]() mutable {
    if (!out.has_grad()) return;
    const double g = out.grad()[0];
    auto xd = logits.data();
    auto yd = targets.data();
    auto gl = logits.mutable_grad();
    for (std::size_t i = 0; i < xd.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-xd[i]));
      gl[i] += g * (pos_weight * yd[i] * (s - 1.0) + (1.0 - yd[i]) * s) / n;
    }
  });
  return out;
}

}  // namespace mpvaa::nk
