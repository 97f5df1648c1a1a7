#include "tsrl/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "tsrl/error.hpp"

namespace tsrl {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

namespace detail {

std::span<double> Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

Tensor Tensor::from_op(const char* op, Shape shape, std::vector<double> data,
                       const std::vector<Tensor>& inputs,
                       std::function<void(const detail::Node&)> backward) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": produced a non-finite value");
    }
  }
  Tensor out(std::move(shape), std::move(data));
  out.node_->op = op;
  bool track = false;
  if (!g_grad_enabled) return out;
  for (const Tensor& in : inputs) track = track || in.requires_grad();
  if (track) {
    out.node_->requires_grad = true;
    for (const Tensor& in : inputs) out.node_->parents.push_back(in.node_);
    out.node_->backward = std::move(backward);
  }
  return out;
}

detail::Node& Tensor::node() const {
  if (!node_) throw Error("tensor: use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node().data.size(); }

std::span<const double> Tensor::data() const { return node().data; }

std::span<double> Tensor::mutable_data() { return node().data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("tensor: item() on shape " + shape_str(shape()));
  }
  return node().data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) throw Error("tensor: requires_grad can only be toggled on leaves");
  node().requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return node().is_leaf(); }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node().grad; }

void Tensor::zero_grad() { node().grad.clear(); }

Tensor Tensor::detach() const {
  return Tensor(node().shape, node().data);
}

std::span<double> Tensor::grad_sink() const {
  if (!requires_grad()) return {};
  return node_->grad_buffer();
}

void backward(const Tensor& loss) {
  const auto& root = loss.node_ptr();
  if (!root) throw Error("backward: undefined loss");
  if (loss.numel() != 1 || !loss.shape().empty()) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  if (root->released) {
    throw Error("backward: graph already consumed; rebuild it with a fresh forward pass");
  }
  if (!root->backward) {
    throw Error("backward: loss was not produced by a recorded graph");
  }

  // Post-order DFS over interior nodes gives a topological order. `order`
  // owns every node, since releasing a node drops its captured parents.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack{{root, 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const std::shared_ptr<detail::Node> parent = node->parents[next++];
      if (parent->backward && !seen.count(parent.get())) {
        seen.insert(parent.get());
        stack.emplace_back(parent, 0);
      }
      continue;
    }
    order.push_back(std::move(node));
    stack.pop_back();
  }

  root->grad_buffer()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node& node = **it;
    node.grad_buffer();
    node.backward(node);
    node.backward = nullptr;
    node.parents.clear();
    node.grad.clear();
    node.grad.shrink_to_fit();
    node.released = true;
  }
}

}  // namespace tsrl
