#include "pgait/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "pgait/errors.hpp"

namespace pgait::ad {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + to_string(shape));
  }
  auto n = static_cast<std::size_t>(ad::numel(shape));
  return from_data(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> data, bool requires_grad) {
  if (ad::numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     to_string(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

template <typename T>
std::int64_t Tensor<T>::dim(int axis) const {
  const int n = ndim();
  if (axis < 0) axis += n;
  if (axis < 0 || axis >= n) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  }
  return node_->shape[static_cast<std::size_t>(axis)];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_->requires_grad) node_->grad.assign(node_->data.size(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  if (node_->data.size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape()));
  }
  return node_->data[0];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<std::int64_t> index) const {
  if (index.size() != node_->shape.size()) throw ShapeError("index rank mismatch");
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    const auto d = node_->shape[axis++];
    if (i < 0 || i >= d) throw ShapeError("index out of range");
    flat = flat * d + i;
  }
  return node_->data[static_cast<std::size_t>(flat)];
}

template <typename T>
void Tensor<T>::backward() const {
  if (node_->data.size() != 1) {
    throw ShapeError("backward() requires a scalar root, got " + to_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are allocated when the first contribution arrives and
  // freed once propagated, so only the live frontier is held in memory.
  for (Node<T>* n : order) {
    if (!n->is_leaf) n->grad.clear();
  }
  node_->grad_buffer()[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->is_leaf || !n->backward_fn || n->grad.empty()) continue;
    n->backward_fn(*n);
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from_data(node_->shape, node_->data, false);
}

namespace detail {

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(const Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  if (grad_enabled()) {
    bool any = false;
    for (const auto* t : inputs) any = any || t->requires_grad();
    if (any) {
      node->requires_grad = true;
      node->is_leaf = false;
      for (const auto* t : inputs) node->parents.push_back(t->node_ptr());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(const Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  if (grad_enabled()) {
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor<T>& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->is_leaf = false;
      for (const auto& t : inputs) node->parents.push_back(t.node_ptr());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor<T>(std::move(node));
}

template Tensor<float> make_result(const char*, Shape, std::vector<float>,
                                   std::initializer_list<const Tensor<float>*>,
                                   std::function<void(const Node<float>&)>);
template Tensor<double> make_result(const char*, Shape, std::vector<double>,
                                    std::initializer_list<const Tensor<double>*>,
                                    std::function<void(const Node<double>&)>);
template Tensor<float> make_result(const char*, Shape, std::vector<float>,
                                   const std::vector<Tensor<float>>&,
                                   std::function<void(const Node<float>&)>);
template Tensor<double> make_result(const char*, Shape, std::vector<double>,
                                    const std::vector<Tensor<double>>&,
                                    std::function<void(const Node<double>&)>);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;

}  // namespace pgait::ad
