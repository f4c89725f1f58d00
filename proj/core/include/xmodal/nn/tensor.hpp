#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace xmodal::nn {

/// NCHW extent.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  [[nodiscard]] std::size_t size() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  [[nodiscard]] std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  [[nodiscard]] std::size_t sample() const noexcept { return static_cast<std::size_t>(c) * h * w; }
  [[nodiscard]] std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Graph node: value, lazily allocated gradient, and the closure that pushes
/// this node's gradient into its parents.
struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<float>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0F);
    return grad;
  }
};

/// Shared handle onto a graph node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);

  [[nodiscard]] bool defined() const noexcept { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const { return node_->shape; }
  [[nodiscard]] std::span<const float> value() const { return node_->value; }
  [[nodiscard]] std::span<float> mutable_value() { return node_->value; }
  [[nodiscard]] std::span<const float> grad() const { return node_->grad; }
  [[nodiscard]] std::span<float> mutable_grad() { return node_->ensure_grad(); }
  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] float item() const { return node_->value.at(0); }
  [[nodiscard]] const std::shared_ptr<Node>& node() const noexcept { return node_; }

  void zero_grad();

  /// Reverse-mode sweep from this (single-element) tensor. Gradients
  /// accumulate into every reachable node that requires them.
  void backward();

  /// Same values, cut from the graph.
  [[nodiscard]] Tensor detach() const;

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

/// Create an op result. When recording is on and any parent needs a
/// gradient, the node keeps its parents and backward closure.
Tensor make_result(Shape shape, std::vector<float> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

}  // namespace xmodal::nn
