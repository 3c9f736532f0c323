#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pgait::ad {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// True unless a NoGradGuard is alive on the calling thread.
bool grad_enabled() noexcept;

/// Disables graph recording on the current thread for its lifetime.
/// Forward passes of a frozen model run under this guard, which makes them
/// safe to execute concurrently.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  // Leaves keep an accumulating gradient; interior nodes get a scratch buffer
  // that only lives for the duration of one backward() call.
  std::vector<T> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Receives the node itself: `grad` is d(root)/d(output), `data` the output.
  std::function<void(const Node& self)> backward_fn;

  /// Gradient buffer, zero-filled on first use.
  std::vector<T>& grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Dense row-major n-d array with reverse-mode gradient support.
///
/// A Tensor is a cheap handle: copies share the same node. Operations in
/// ops.hpp build new nodes and, when any operand requires a gradient and
/// recording is enabled, attach an adjoint closure. backward() walks the
/// recorded graph in reverse topological order and accumulates into leaves.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<Node<T>>;

  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  /// Size of dimension `axis`; negative axes count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->data.size()); }

  std::span<const T> data() const { return node_->data; }
  /// Mutable view of the values. Intended for leaves (parameters, buffers).
  std::span<T> data_mut() { return node_->data; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool has_grad() const { return node_->grad.size() == node_->data.size() && !node_->data.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> grad_mut() { return node_->grad_buffer(); }
  void zero_grad();

  T item() const;
  T at(std::initializer_list<std::int64_t> index) const;

  /// Accumulates d(this)/d(leaf) into every reachable leaf that requires a
  /// gradient. `this` must be a scalar.
  void backward() const;

  /// Copy of the values with no graph attached.
  Tensor detach() const;

  Node<T>* node() const noexcept { return node_.get(); }
  const NodePtr& node_ptr() const noexcept { return node_; }

 private:
  NodePtr node_;
};

namespace detail {

/// Builds an op result. The adjoint is attached only if recording is enabled
/// and at least one input requires a gradient.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(const Node<T>&)> backward_fn);

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(const Node<T>&)> backward_fn);

}  // namespace detail

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace pgait::ad
