#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "mga/common.hpp"

namespace mga {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until backward reaches this node
  bool tracked = false;
};

/// Dense row-major tensor of 64-bit floats. Copies share storage; all
/// operations produce fresh tensors, so shared handles never observe
/// surprise mutation (parameter updates are the deliberate exception).
class Tensor {
 public:
  Tensor() : data_(std::make_shared<TensorData>()) {}

  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }

  const Shape& shape() const { return data_->shape; }
  int rank() const { return static_cast<int>(data_->shape.size()); }
  int extent(int axis) const;
  int64_t size() const { return static_cast<int64_t>(data_->value.size()); }

  std::vector<double>& values() { return data_->value; }
  const std::vector<double>& values() const { return data_->value; }

  double item() const;

  double at(std::initializer_list<int> idx) const;

  bool tracked() const { return data_->tracked; }
  Tensor& set_tracked(bool t = true) {
    data_->tracked = t;
    return *this;
  }

  bool has_grad() const { return !data_->grad.empty(); }
  const std::vector<double>& grad() const;
  std::vector<double>& ensure_grad();
  void clear_grad() { data_->grad.clear(); }

  bool all_finite() const;

  /// Deep copy (fresh storage, grad not copied).
  Tensor clone() const;

  const std::shared_ptr<TensorData>& node() const { return data_; }

 private:
  std::shared_ptr<TensorData> data_;
};

/// Records each differentiable operation as a backward closure; backward()
/// replays them in reverse. One live tape per thread; constructing a tape
/// makes it the active recorder for that thread until destruction.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> fn) { records_.push_back(std::move(fn)); }

  /// Seeds d(loss)/d(loss)=1 and replays records in reverse order,
  /// accumulating grads into every tracked input. A second call without
  /// reset() is a usage error.
  void backward(const Tensor& loss);

  void reset();

  size_t size() const { return records_.size(); }

 private:
  std::vector<std::function<void()>> records_;
  bool consumed_ = false;
};

/// The thread's active tape, or nullptr when not recording.
Tape* active_tape();

/// Suppresses recording for its scope (teacher forward passes, numeric
/// probes inside grad_check).
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  Tape* saved_;
};

namespace detail {
void set_active_tape(Tape* t);
}

inline std::vector<double>& grad_buffer(const std::shared_ptr<TensorData>& n) {
  if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
  return n->grad;
}

/// Central finite differences of a scalar-valued function against its
/// reverse-mode gradient. Returns the max over coordinates of
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double h = 1e-4);

}  // namespace mga
