#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tmd::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One node of the autodiff tape. A node owns its value and (lazily) its
// gradient, plus strong references to the nodes it was computed from.
struct Node {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::span<float> grad_buffer();
};

}  // namespace detail

// Handle to a row-major float32 array. Copies share storage, like the
// tensors of most eager autodiff frameworks; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const float> data() const;
  std::span<float> mutable_data();
  float item() const;
  float operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  // Reverse-mode sweep from this (scalar) tensor. Gradients accumulate into
  // every reachable tensor that requires them.
  void backward() const;

  // Detached deep copy (no tape, same requires_grad flag).
  Tensor clone() const;
  // Same values, no tape, requires_grad=false.
  Tensor detach() const;

  bool all_finite() const;

  // Internal: used by ops to stitch the tape.
  static Tensor make_result(Shape shape, std::vector<float> values,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward_fn);
  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const detail::Node& checked() const;

  std::shared_ptr<detail::Node> node_;
};

// While alive on a thread, ops on that thread record no tape (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

 private:
  bool previous_;
};

}  // namespace tmd::nn
