#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mpvaa/errors.hpp"

namespace mpvaa::nk {

// Storage precision. Values are held as double internally; f32 tensors are
// rounded to float after every write so they behave like float32 arrays.
enum class Dtype : std::uint8_t { f32, f64 };

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorStorage {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  Dtype dtype = Dtype::f32;
  bool requires_grad = false;
};

// Shared handle to a dense row-major array. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, Dtype dtype = Dtype::f32, bool requires_grad = false);
  static Tensor full(Shape shape, double value, Dtype dtype = Dtype::f32,
                     bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, Dtype dtype = Dtype::f32,
                     bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       Dtype dtype = Dtype::f32, bool requires_grad = false);
  static Tensor scalar(double value, Dtype dtype = Dtype::f32);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t dim(std::size_t axis) const;
  // Rows/cols of a rank-2 tensor; a rank-1 tensor is read as one row.
  std::size_t rows() const;
  std::size_t cols() const;
  Dtype dtype() const;

  std::span<const double> data() const;
  // Writes bypass the tape; use only on leaves between optimizer steps.
  std::span<double> mutable_data() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;  // allocates zeros when absent
  void zero_grad() const;

  // Copy of the values with no gradient history.
  Tensor detach() const;
  Tensor to(Dtype dtype) const;
  // Round stored values to the tensor's precision and reject NaN/Inf.
  void canonicalize(const char* what) const;

  TensorStorage& storage() const;
  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

 private:
  explicit Tensor(std::shared_ptr<TensorStorage> s) : s_(std::move(s)) {}
  std::shared_ptr<TensorStorage> s_;
};

// Ordered record of executed differentiable operations. Ops register an
// adjoint closure when a tape is active on the current thread and at least one
// input requires grad.
class GradTape {
 public:
  using Adjoint = std::function<void()>;

  void record(Adjoint adjoint);
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  // Replays adjoints newest-first, then clears.
  void replay();
  void clear() { entries_.clear(); }

  static GradTape* active();

 private:
  friend class TapeScope;
  std::vector<Adjoint> entries_;
};

// Activates a tape on this thread for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(GradTape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradTape* previous_;
};

// Seeds d(loss)/d(loss) = 1 and replays the active tape. Throws ContractError
// for a non-scalar loss or an empty tape (already consumed), and
// ContractError for a loss with no gradient history.
void backward(const Tensor& loss);

}  // namespace mpvaa::nk
