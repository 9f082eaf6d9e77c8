#include "mga/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mga {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : data_(std::make_shared<TensorData>()) {
  for (int e : shape) {
    if (e <= 0)
      throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  data_->shape = std::move(shape);
  data_->value.assign(static_cast<size_t>(shape_numel(data_->shape)), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : data_(std::make_shared<TensorData>()) {
  for (int e : shape) {
    if (e <= 0)
      throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw DimensionError("shape " + shape_str(shape) + " wants " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  data_->shape = std::move(shape);
  data_->value = std::move(values);
}

int Tensor::extent(int axis) const {
  if (axis < 0 || axis >= rank())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape()));
  return data_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1)
    throw UsageError("item() needs a single-element tensor, got " + shape_str(shape()));
  return data_->value[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  if (static_cast<int>(idx.size()) != rank())
    throw DimensionError("index rank mismatch for " + shape_str(shape()));
  int64_t flat = 0;
  int axis = 0;
  for (int i : idx) {
    if (i < 0 || i >= data_->shape[axis])
      throw DimensionError("index out of range for " + shape_str(shape()));
    flat = flat * data_->shape[axis] + i;
    ++axis;
  }
  return data_->value[static_cast<size_t>(flat)];
}

const std::vector<double>& Tensor::grad() const {
  if (data_->grad.empty())
    throw UsageError("tensor has no gradient; run backward first");
  return data_->grad;
}

std::vector<double>& Tensor::ensure_grad() { return grad_buffer(data_); }

bool Tensor::all_finite() const {
  for (double v : data_->value)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::clone() const {
  Tensor out(data_->shape, data_->value);
  out.data_->tracked = data_->tracked;
  return out;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

namespace detail {
void set_active_tape(Tape* t) { g_active_tape = t; }
}

Tape::Tape() {
  if (g_active_tape)
    throw UsageError("a tape is already active on this thread");
  g_active_tape = this;
}

Tape::~Tape() {
  if (g_active_tape == this) g_active_tape = nullptr;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.tracked())
    throw UsageError("backward on an untracked tensor");
  if (loss.size() != 1)
    throw UsageError("backward needs a scalar loss, got " + shape_str(loss.shape()));
  if (consumed_)
    throw UsageError("tape already consumed; reset() before reusing");
  consumed_ = true;
  grad_buffer(loss.node())[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

void Tape::reset() {
  records_.clear();
  consumed_ = false;
}

NoGrad::NoGrad() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoGrad::~NoGrad() { g_active_tape = saved_; }

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double h) {
  if (active_tape())
    throw UsageError("grad_check must run outside any active tape");

  std::vector<double> analytic;
  {
    Tape tape;
    Tensor probe = x.clone();
    probe.set_tracked();
    Tensor y = f(probe);
    tape.backward(y);
    analytic = probe.has_grad() ? probe.grad()
                                : std::vector<double>(probe.values().size(), 0.0);
  }

  NoGrad ng;
  Tensor probe = x.clone();
  probe.set_tracked(false);
  double max_err = 0.0;
  for (size_t i = 0; i < probe.values().size(); ++i) {
    double saved = probe.values()[i];
    probe.values()[i] = saved + h;
    double fp = f(probe).item();
    probe.values()[i] = saved - h;
    double fm = f(probe).item();
    probe.values()[i] = saved;
    double numeric = (fp - fm) / (2.0 * h);
    double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    double err = std::abs(analytic[i] - numeric) / denom;
    if (err > max_err) max_err = err;
  }
  return max_err;
}

}  // namespace mga
