#include "anchorvote/micronet/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "anchorvote/error.hpp"

namespace anchorvote::micronet {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace {

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size()) {
    throw ShapeMismatchError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                             shape_str(shape));
  }
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return n;
}

void check_finite(const std::vector<double>& data) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericError("tensor op produced a non-finite value");
  }
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
  check_finite(data);
  return Tensor(new_node(std::move(shape), std::move(data), false));
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = micronet::numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = micronet::numel(shape);
  return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  check_finite(data);
  return Tensor(new_node(std::move(shape), std::move(data), true));
}

Tensor Tensor::make_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                       std::function<void(detail::Node&)> backward_fn) {
  check_finite(data);
  bool needs_grad = false;
  for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
  auto n = new_node(std::move(shape), std::move(data), needs_grad);
  if (needs_grad) {
    for (Tensor& p : parents) n->parents.push_back(p.node_);
    n->backward = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) throw ShapeMismatchError("axis out of range for " + shape_str(node_->shape));
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }
std::span<const double> Tensor::data() const { return node_->data; }

double Tensor::item() const {
  if (node_->data.size() != 1) throw ShapeMismatchError("item() needs a one-element tensor");
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->data.size(), 0.0);
}

std::span<double> Tensor::mutable_data() {
  if (node_->backward) throw Error("mutable_data() is only available on leaf tensors");
  return node_->data;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) throw NumericError("backward() needs a scalar loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (detail::Node* n : order) {
    if (n->backward || n->grad.size() != n->data.size()) n->grad.assign(n->data.size(), 0.0);
  }
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

Tensor& ParameterSet::add(const std::string& name, Tensor t) {
  if (contains(name)) throw InvalidArgumentError("duplicate parameter name " + name);
  entries_.emplace_back(name, std::move(t));
  return entries_.back().second;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw InvalidArgumentError("unknown parameter " + name);
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

Tensor normal_parameter(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> data(numel(shape));
  for (double& v : data) v = dist(rng);
  return Tensor::parameter(std::move(shape), std::move(data));
}

}  // namespace anchorvote::micronet
