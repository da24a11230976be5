#include "mpvaa/numkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mpvaa::nk {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimension sizes must be positive, got " + shape_str(shape));
  }
}

double round_to(Dtype dtype, double v) {
  return dtype == Dtype::f32 ? static_cast<double>(static_cast<float>(v)) : v;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, Dtype dtype, bool requires_grad) {
  return full(std::move(shape), 0.0, dtype, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, Dtype dtype, bool requires_grad) {
  check_shape(shape);
  auto s = std::make_shared<TensorStorage>();
  s->data.assign(shape_numel(shape), round_to(dtype, value));
  s->shape = std::move(shape);
  s->dtype = dtype;
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, Dtype dtype, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  auto s = std::make_shared<TensorStorage>();
  s->shape = std::move(shape);
  s->data = std::move(values);
  s->dtype = dtype;
  s->requires_grad = requires_grad;
  Tensor t(std::move(s));
  t.canonicalize("Tensor::from");
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, Dtype dtype,
                      bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return from({r, c}, std::move(values), dtype, requires_grad);
}

Tensor Tensor::scalar(double value, Dtype dtype) { return full({1}, value, dtype); }

TensorStorage& Tensor::storage() const {
  if (!s_) throw ContractError("use of an undefined tensor");
  return *s_;
}

const Shape& Tensor::shape() const { return storage().shape; }
std::size_t Tensor::numel() const { return storage().data.size(); }
Dtype Tensor::dtype() const { return storage().dtype; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& sh = shape();
  if (axis >= sh.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(sh));
  }
  return sh[axis];
}

std::size_t Tensor::rows() const {
  const auto& sh = shape();
  if (sh.size() == 1) return 1;
  if (sh.size() != 2) throw ShapeError("expected a matrix, got " + shape_str(sh));
  return sh[0];
}

std::size_t Tensor::cols() const {
  const auto& sh = shape();
  if (sh.size() == 1) return sh[0];
  if (sh.size() != 2) throw ShapeError("expected a matrix, got " + shape_str(sh));
  return sh[1];
}

std::span<const double> Tensor::data() const { return storage().data; }
std::span<double> Tensor::mutable_data() const { return storage().data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return storage().data[0];
}

bool Tensor::requires_grad() const { return storage().requires_grad; }
void Tensor::set_requires_grad(bool on) { storage().requires_grad = on; }
bool Tensor::has_grad() const { return !storage().grad.empty(); }
std::span<const double> Tensor::grad() const { return storage().grad; }

std::span<double> Tensor::mutable_grad() const {
  auto& s = storage();
  if (s.grad.empty()) s.grad.assign(s.data.size(), 0.0);
  return s.grad;
}

void Tensor::zero_grad() const {
  auto& s = storage();
  std::fill(s.grad.begin(), s.grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& s = storage();
  auto c = std::make_shared<TensorStorage>();
  c->shape = s.shape;
  c->data = s.data;
  c->dtype = s.dtype;
  return Tensor(std::move(c));
}

Tensor Tensor::to(Dtype dtype) const {
  Tensor t = detach();
  t.storage().dtype = dtype;
  t.canonicalize("Tensor::to");
  return t;
}

void Tensor::canonicalize(const char* what) const {
  auto& s = storage();
  for (auto& v : s.data) {
    v = round_to(s.dtype, v);
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value in ") + what);
    }
  }
}

namespace {
thread_local GradTape* g_active_tape = nullptr;
}

void GradTape::record(Adjoint adjoint) { entries_.push_back(std::move(adjoint)); }

void GradTape::replay() {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  entries_.clear();
}

GradTape* GradTape::active() { return g_active_tape; }

TapeScope::TapeScope(GradTape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  GradTape* tape = GradTape::active();
  if (tape == nullptr) throw ContractError("backward() called with no active gradient tape");
  if (!loss.requires_grad()) {
    throw ContractError("empty gradient: loss is detached from every trainable leaf");
  }
  if (tape->empty()) {
    throw ContractError("gradient tape is empty; backward() already ran for this forward pass");
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] = 1.0;
  tape->replay();
}

}  // namespace mpvaa::nk
