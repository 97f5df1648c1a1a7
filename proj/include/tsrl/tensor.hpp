#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tsrl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {

// One recorded value. Leaves own parameters or inputs; interior nodes also
// carry the rule that pushes their gradient into their parents.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Node& self)> backward;
  bool released = false;

  bool is_leaf() const { return parents.empty() && !backward && !released; }

  /// Zero-initialised on first use.
  std::span<double> grad_buffer();
};

}  // namespace detail

/// Dense row-major float64 tensor with reverse-mode autodiff. Copies are
/// shallow: two Tensor handles may refer to the same node.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Builds the output of a differentiable op. `backward` receives the output
  /// node (whose grad is populated) and must accumulate into the inputs that
  /// require grad. Nothing is recorded when no input requires grad.
  static Tensor from_op(const char* op, Shape shape, std::vector<double> data,
                        const std::vector<Tensor>& inputs,
                        std::function<void(const detail::Node&)> backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Direct write access, meant for leaves (initialisation, optimiser).
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Same values, no history.
  Tensor detach() const;

  /// Gradient buffer of this tensor if it requires grad, else empty span.
  /// Intended for op implementations.
  std::span<double> grad_sink() const;

  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& node() const;

  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

/// Populates grads of every requires-grad leaf reachable from `loss` and then
/// releases the recorded graph. Calling it again on the same loss throws.
void backward(const Tensor& loss);

}  // namespace tsrl
