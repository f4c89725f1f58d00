#include "xmodal/nn/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "xmodal/errors.hpp"

namespace xmodal::nn {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string Shape::str() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from(shape, std::vector<float>(shape.size(), 0.0F), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  if (values.size() != shape.size()) {
    throw ArgumentError("tensor: " + std::to_string(values.size()) + " values for shape " + shape.str());
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0F);
}

void Tensor::backward() {
  if (node_->value.size() != 1) throw ArgumentError("backward() requires a single-element tensor");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad()[0] += 1.0F;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

Tensor Tensor::detach() const { return from(node_->shape, node_->value, false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

Tensor make_result(Shape shape, std::vector<float> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  const bool track = g_grad_enabled && std::any_of(parents.begin(), parents.end(),
                                                   [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace xmodal::nn
