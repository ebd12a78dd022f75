#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace driftlab::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;
  bool recorded = false;     // produced by an op on some tape
};
}  // namespace detail

// Dense row-major float64 tensor. Copies share storage (handle semantics,
// like a graph node reference); use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  // Rows of one-hot encodings: shape [ids.size() x width].
  static Tensor one_hot(std::span<const int> ids, std::size_t width);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t dim(std::size_t i) const;
  // For a rank>=1 tensor: number of trailing-dimension slices / slice width.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;
  double at(std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  // Grad buffer, allocated (zero-filled) on first access.
  std::span<double> grad_buffer() const;
  void zero_grad();

  // Deep copy of data; grad is not copied. Keeps requires_grad.
  Tensor clone() const;
  // Deep copy with requires_grad cleared.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  detail::TensorImpl& impl() const;

  std::shared_ptr<detail::TensorImpl> impl_;

  friend class Tape;
};

// Ordered record of differentiable operations. Constructing a Tape makes it
// the thread's active tape until it is destroyed; ops executed while no tape
// is active record nothing and produce constants.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(const Tensor& output, std::vector<Tensor> inputs, BackwardFn fn);
  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule once, newest first.
  // A tape can be backpropagated once.
  void backward(const Tensor& loss);

  std::size_t size() const { return ops_.size(); }

 private:
  struct Op {
    Tensor output;
    std::vector<Tensor> inputs;
    BackwardFn fn;
  };
  std::vector<Op> ops_;
  Tape* previous_ = nullptr;
  bool spent_ = false;
};

// Suspends recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

// True when an op over `inputs` must be recorded on the active tape.
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(const std::vector<Tensor>& inputs);

}  // namespace driftlab::ad
