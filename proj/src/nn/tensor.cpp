#include "tmd/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "tmd/errors.hpp"

namespace tmd::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace detail {

std::span<float> Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad;
}

}  // namespace detail

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ConfigError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw ConfigError("tensor shape " + shape_string(shape) + " has a zero dimension");
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  validate_shape(shape);
  auto node = std::make_shared<detail::Node>();
  node->data.assign(shape_size(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  validate_shape(shape);
  if (shape_size(shape) != values.size()) {
    throw ConfigError("tensor shape " + shape_string(shape) + " needs " +
                      std::to_string(shape_size(shape)) + " values, got " +
                      std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) { return full({1}, value, requires_grad); }

const detail::Node& Tensor::checked() const {
  if (!node_) throw StateError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ConfigError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const { return checked().data.size(); }

std::span<const float> Tensor::data() const { return checked().data; }

std::span<float> Tensor::mutable_data() {
  checked();
  return node_->data;
}

float Tensor::item() const {
  const auto& n = checked();
  if (n.data.size() != 1) throw ConfigError("item() on tensor of shape " + shape_string(n.shape));
  return n.data[0];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::span<const float> Tensor::grad() const {
  const auto& n = checked();
  if (n.grad.empty()) throw StateError("tensor has no gradient; run backward() first");
  return n.grad;
}

std::span<float> Tensor::mutable_grad() {
  checked();
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  checked();
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

void Tensor::backward() const {
  const auto& root = checked();
  if (root.data.size() != 1) {
    throw StateError("backward() needs a scalar loss, got shape " + shape_string(root.shape));
  }
  if (!root.requires_grad) {
    throw StateError("backward() on a tensor with no recorded forward pass");
  }

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

Tensor Tensor::clone() const {
  const auto& n = checked();
  return from(n.shape, n.data, n.requires_grad);
}

Tensor Tensor::detach() const {
  const auto& n = checked();
  return from(n.shape, n.data, false);
}

bool Tensor::all_finite() const {
  const auto& d = checked().data;
  return std::all_of(d.begin(), d.end(), [](float v) { return std::isfinite(v); });
}

Tensor Tensor::make_result(Shape shape, std::vector<float> values, std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  const bool any = !NoGradGuard::active() && std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

namespace {
thread_local bool g_no_grad = false;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

}  // namespace tmd::nn
