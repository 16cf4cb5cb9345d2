#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ronet/errors.hpp"

namespace ronet {

// Cache-line aligned storage. Vectorized reductions start at an offset that
// depends on the pointer's alignment, so unaligned buffers would make float
// results depend on where the heap happened to place them.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

// Tensor extents. Image data is ordered (batch, channel, height, width);
// a rank-0 shape is a scalar with one element.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  std::size_t numel() const {
    std::size_t n = 1;
    for (std::size_t d : dims_) n *= d;
    return n;
  }

  bool operator==(const Shape& other) const = default;

  std::string str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

 private:
  std::vector<std::size_t> dims_;
};

// Dense row-major array handle. Copies share storage; the values are treated
// as immutable once an operation has produced them, with two exceptions:
// gradient accumulation and in-place optimizer/running-statistic updates.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : impl_(std::make_shared<Impl>()) {
    impl_->data.assign(shape.numel(), fill);
    impl_->shape = std::move(shape);
  }

  BasicTensor(Shape shape, std::vector<T> values)
      : impl_(std::make_shared<Impl>()) {
    if (values.size() != shape.numel()) {
      throw ShapeError("tensor: " + std::to_string(values.size()) +
                       " values for shape " + shape.str());
    }
    impl_->data.assign(values.begin(), values.end());
    impl_->shape = std::move(shape);
  }

  static BasicTensor scalar(T value) { return BasicTensor(Shape{}, value); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape[i]; }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() { return impl_->data; }

  T item() const {
    if (numel() != 1) {
      throw ShapeError("item() on tensor of shape " + shape().str());
    }
    return impl_->data[0];
  }

  // 4-D accessor, (n, c, h, w).
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    const auto& s = impl_->shape;
    return impl_->data[((n * s[1] + c) * s[2] + h) * s[3] + w];
  }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  BasicTensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return !impl_->grad.empty(); }

  // Gradient values; an absent gradient reads as zeros.
  std::span<const T> grad() const { return grad_buffer(); }

  std::span<T> grad_buffer() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T{0});
    return impl_->grad;
  }

  void zero_grad() { impl_->grad.clear(); }

  // Deep copy of the values, outside any tape.
  BasicTensor clone() const {
    BasicTensor out(shape());
    out.impl_->data = impl_->data;
    return out;
  }

  bool same_storage(const BasicTensor& other) const {
    return impl_ == other.impl_;
  }

 private:
  struct Impl {
    Shape shape;
    AlignedVector<T> data;
    AlignedVector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

// Ordered record of executed operations. Each node owns a closure that reads
// the gradient of its output and accumulates into its inputs.
template <typename T>
class BasicTape {
 public:
  using Tensor = BasicTensor<T>;

  void record(std::vector<Tensor> inputs, Tensor output,
              std::function<void()> adjoint) {
    if (consumed_) {
      throw ContractError("tape: recording onto a tape already replayed");
    }
    nodes_.push_back({std::move(inputs), std::move(output), std::move(adjoint)});
  }

  // Seeds d(loss)/d(loss) = 1 and replays adjoints in reverse order of
  // recording, which is a reverse topological order of the graph.
  void backward(const Tensor& loss) {
    if (consumed_) {
      throw ContractError("tape: backward called twice without re-recording");
    }
    if (!loss.defined() || loss.numel() != 1) {
      throw ContractError("backward: loss must be a scalar tensor");
    }
    bool found = false;
    for (const auto& node : nodes_) {
      if (node.output.same_storage(loss)) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw ContractError("backward: loss was not recorded on this tape");
    }
    consumed_ = true;
    loss.grad_buffer()[0] += T{1};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output.has_grad()) it->adjoint();
    }
  }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  void reset() {
    nodes_.clear();
    consumed_ = false;
  }

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> adjoint;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

namespace detail {
template <typename T>
inline thread_local BasicTape<T>* active_tape = nullptr;
}  // namespace detail

template <typename T>
BasicTape<T>* active_tape() {
  return detail::active_tape<T>;
}

// Routes operations executed on this thread onto `tape` for the lifetime of
// the scope. Scopes nest; the previous tape is restored on exit.
template <typename T>
class BasicTapeScope {
 public:
  explicit BasicTapeScope(BasicTape<T>& tape)
      : previous_(detail::active_tape<T>) {
    detail::active_tape<T> = &tape;
  }
  // Disables recording for the lifetime of the scope.
  BasicTapeScope() : previous_(detail::active_tape<T>) {
    detail::active_tape<T> = nullptr;
  }
  ~BasicTapeScope() { detail::active_tape<T> = previous_; }

  BasicTapeScope(const BasicTapeScope&) = delete;
  BasicTapeScope& operator=(const BasicTapeScope&) = delete;

 private:
  BasicTape<T>* previous_;
};

template <typename T>
void backward(const BasicTensor<T>& loss, BasicTape<T>& tape) {
  tape.backward(loss);
}

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;
using Tape = BasicTape<float>;
using Tape64 = BasicTape<double>;
using TapeScope = BasicTapeScope<float>;
using TapeScope64 = BasicTapeScope<double>;
// Scope that runs its body without recording.
using NoGradScope = BasicTapeScope<float>;

}  // namespace ronet
