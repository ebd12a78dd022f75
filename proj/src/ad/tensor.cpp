#include "driftlab/ad/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "driftlab/errors.hpp"

namespace driftlab::ad {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->data.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::one_hot(std::span<const int> ids, std::size_t width) {
  Tensor t = zeros({ids.size(), width});
  auto d = t.data();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= width) {
      throw IndexError("one_hot: id " + std::to_string(ids[r]) + " outside [0, " +
                       std::to_string(width) + ")");
    }
    d[r * width + static_cast<std::size_t>(ids[r])] = 1.0;
  }
  return t;
}

detail::TensorImpl& Tensor::impl() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }
std::size_t Tensor::numel() const { return impl().data.size(); }

std::size_t Tensor::dim(std::size_t i) const {
  const Shape& s = shape();
  if (i >= s.size()) throw DimensionError("dim " + std::to_string(i) + " of " + shape_str(s));
  return s[i];
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.back();
}

std::size_t Tensor::rows() const { return numel() / cols(); }

std::span<double> Tensor::data() { return impl().data; }
std::span<const double> Tensor::data() const { return impl().data; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on non-scalar " + shape_str(shape()));
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl().requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return !impl().grad.empty(); }
std::span<const double> Tensor::grad() const { return impl().grad; }

std::span<double> Tensor::grad_buffer() const {
  auto& im = impl();
  if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
  return im.grad;
}

void Tensor::zero_grad() { impl().grad.clear(); }

Tensor Tensor::clone() const {
  auto impl_copy = std::make_shared<detail::TensorImpl>();
  impl_copy->shape = impl().shape;
  impl_copy->data = impl().data;
  impl_copy->requires_grad = impl().requires_grad;
  return Tensor(std::move(impl_copy));
}

Tensor Tensor::detach() const {
  Tensor t = clone();
  t.set_requires_grad(false);
  return t;
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() {
  if (g_active_tape == this) g_active_tape = previous_;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const Tensor& output, std::vector<Tensor> inputs, BackwardFn fn) {
  if (spent_) throw ContractError("recording on a tape that was already backpropagated");
  output.impl().requires_grad = true;
  output.impl().recorded = true;
  ops_.push_back(Op{output, std::move(inputs), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (spent_) throw ContractError("backward called twice on the same tape");
  if (loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  auto it = std::find_if(ops_.begin(), ops_.end(),
                         [&](const Op& op) { return op.output.same_node(loss); });
  if (it == ops_.end()) throw ContractError("backward: loss was not recorded on this tape");

  Tensor seed = loss;
  seed.grad_buffer()[0] += 1.0;
  const auto last = static_cast<std::size_t>(it - ops_.begin());
  for (std::size_t i = last + 1; i-- > 0;) {
    Op& op = ops_[i];
    if (!op.output.has_grad()) continue;  // not reachable from loss
    op.fn();
  }
  spent_ = true;
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }
NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

bool should_record(const std::vector<Tensor>& inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

}  // namespace driftlab::ad
