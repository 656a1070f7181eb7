#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace anchorvote::micronet {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;
};
}  // namespace detail

// Dense float64 array that records the operations producing it so that
// backward() can run reverse-mode differentiation. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> data);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor parameter(Shape shape, std::vector<double> data);
  static Tensor scalar(double value) { return constant({1}, {value}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::span<const double> data() const;
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  // Empty span until a backward pass reached this tensor.
  std::span<const double> grad() const;
  void zero_grad();

  // In-place access for optimizers and initialisers. Only legal on leaves.
  std::span<double> mutable_data();

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  // Builds an op output. Throws NumericError if `data` holds NaN or Inf.
  static Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                        std::function<void(detail::Node&)> backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Reverse-mode pass from a scalar loss. Gradients accumulate into leaves
// (call zero_grad between steps); intermediate grads are reset each pass.
void backward(const Tensor& loss);

// Named, ordered parameter collection shared by modules and optimizers.
class ParameterSet {
 public:
  Tensor& add(const std::string& name, Tensor t);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;
  void zero_grad();

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Parameter initialised from N(0, std^2).
Tensor normal_parameter(Shape shape, double stddev, std::mt19937_64& rng);

}  // namespace anchorvote::micronet
