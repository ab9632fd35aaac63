#pragma once

#include <cstring>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "tripletnet/common.hpp"

namespace tripletnet {

/// N-dimensional float array in row-major order. A Tensor is a shared
/// handle: copies alias the same storage, clone() deep-copies. The
/// gradient buffer lives next to the data and is allocated on demand.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, bool requires_grad = false) {
    st_ = std::make_shared<Storage>();
    int64_t n = 1;
    for (int e : shape) {
      if (e <= 0) throw ShapeError("tensor extents must be positive");
      n *= e;
    }
    st_->shape = std::move(shape);
    st_->data.assign(size_t(n), T(0));
    st_->requires_grad = requires_grad;
    st_->leaf = requires_grad;
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, T value) {
    Tensor t(std::move(shape));
    for (auto& x : t.st_->data) x = value;
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<T> values, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    if (values.size() != t.st_->data.size())
      throw ShapeError("tensor data length does not match shape");
    t.st_->data = std::move(values);
    return t;
  }

  static Tensor scalar_of(T value) { return from({1}, {value}); }

  bool defined() const { return bool(st_); }
  const std::vector<int>& shape() const { return st_->shape; }
  int ndim() const { return int(st_->shape.size()); }
  int dim(int i) const { return st_->shape[size_t(i)]; }
  int64_t numel() const { return int64_t(st_->data.size()); }

  T* data() { return st_->data.data(); }
  const T* data() const { return st_->data.data(); }
  std::span<const T> values() const { return {st_->data.data(), st_->data.size()}; }

  bool requires_grad() const { return st_ && st_->requires_grad; }
  bool is_leaf() const { return st_ && st_->leaf; }

  void set_requires_grad(bool rg) {
    st_->requires_grad = rg;
    st_->leaf = rg;
  }

  /// Marks an op output as gradient-carrying without making it a leaf;
  /// the tape zeroes non-leaf gradients before every backward replay.
  void mark_taped() {
    st_->requires_grad = true;
    st_->leaf = false;
  }

  /// Gradient buffer, allocated (zeroed) on first use.
  T* grad() {
    if (st_->grad.empty()) st_->grad.assign(st_->data.size(), T(0));
    return st_->grad.data();
  }

  const T* grad_data() const { return st_->grad.empty() ? nullptr : st_->grad.data(); }
  bool has_grad() const { return st_ && !st_->grad.empty(); }

  void zero_grad() {
    if (!st_->grad.empty()) std::memset(st_->grad.data(), 0, st_->grad.size() * sizeof(T));
  }

  Tensor clone() const {
    Tensor t;
    t.st_ = std::make_shared<Storage>(*st_);
    return t;
  }

  /// Value of a single-element tensor.
  T scalar() const {
    if (numel() != 1) throw ValueError("scalar() requires a single-element tensor");
    return st_->data[0];
  }

  bool all_finite() const {
    for (T x : st_->data)
      if (!std::isfinite(double(x))) return false;
    return true;
  }

  bool same_storage(const Tensor& other) const { return st_ == other.st_; }

 private:
  struct Storage {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    bool leaf = false;
  };
  std::shared_ptr<Storage> st_;
};

/// Ordered record of the primitives executed during a forward pass.
/// Each node owns a closure that propagates gradients to its inputs.
/// backward() zeroes all intermediate (non-leaf) gradients, seeds the
/// loss with one and replays the closures in reverse, so leaf
/// gradients accumulate additively across repeated calls.
template <typename T>
class Tape {
 public:
  void record(const Tensor<T>& output, std::function<void()> backward_fn) {
    outputs_.push_back(output);
    nodes_.push_back(std::move(backward_fn));
  }

  size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    outputs_.clear();
  }

  void backward(Tensor<T> loss) {
    if (loss.numel() != 1) throw ValueError("backward requires a scalar loss");
    if (!loss.requires_grad()) return;
    for (auto& t : outputs_)
      if (!t.is_leaf()) t.zero_grad();
    loss.grad()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> nodes_;
  std::vector<Tensor<T>> outputs_;
};

template <typename T>
void backward(const Tensor<T>& loss, Tape<T>& tape) {
  tape.backward(loss);
}

}  // namespace tripletnet
