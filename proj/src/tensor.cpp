#include "surgant/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "surgant/errors.hpp"

namespace surgant {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<TensorNode>()) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_to_string(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad) {
  return Tensor({rows, cols}, std::move(data), requires_grad);
}

Tensor Tensor::vector(std::vector<double> data, bool requires_grad) {
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data), requires_grad);
}

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  if (s.size() == 1) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

std::size_t Tensor::cols() const { return node_->shape.back(); }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_to_string(shape()));
  return node_->data[0];
}

std::span<double> Tensor::mutable_grad() const { return grad_sink(*this); }

void Tensor::zero_grad() {
  node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t(node_->shape, node_->data, node_->requires_grad);
  return t;
}

std::span<double> grad_sink(const Tensor& t) {
  auto& g = t.node_->grad;
  if (g.empty()) g.assign(t.node_->data.size(), 0.0);
  return g;
}

void Graph::note_input(const Tensor& t, bool& track) {
  if (!t.defined()) throw GraphError("op received an undefined tensor");
  const TensorNode* node = t.node_.get();
  if (node->node_id >= 0 && node->graph != this) {
    throw GraphError("tensor recorded on another graph cannot feed this graph");
  }
  if (!grad_enabled_ || !node->requires_grad) return;
  track = true;
  if (node->node_id < 0 && leaf_ids_.insert(node).second) leaves_.push_back(t);
}

Tensor Graph::make_output(Shape shape, std::vector<double> data, bool track) {
  if (consumed_) throw GraphError("graph already ran backward; record a new graph");
  Tensor out(std::move(shape), std::move(data), track);
  if (track) {
    out.node_->node_id = static_cast<std::int64_t>(ops_.size());
    out.node_->graph = this;
    ops_.push_back(Op{out, {}});
  }
  return out;
}

Tensor Graph::record(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs) {
  bool track = false;
  for (const Tensor* t : inputs) note_input(*t, track);
  return make_output(std::move(shape), std::move(data), track);
}

Tensor Graph::record(Shape shape, std::vector<double> data, std::span<const Tensor> inputs) {
  bool track = false;
  for (const Tensor& t : inputs) note_input(t, track);
  return make_output(std::move(shape), std::move(data), track);
}

void Graph::set_backward(BackwardFn fn) {
  if (ops_.empty() || ops_.back().backward) throw GraphError("set_backward without a fresh taped op");
  ops_.back().backward = std::move(fn);
}

void Graph::backward(const Tensor& loss) {
  if (consumed_) throw GraphError("backward() already ran on this graph; re-record before calling again");
  if (loss.numel() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_to_string(loss.shape()));
  if (loss.node_->graph != this || loss.node_id() < 0) {
    throw GraphError("loss was not recorded on this graph");
  }
  consumed_ = true;
  for (const Tensor& leaf : leaves_) grad_sink(leaf);
  grad_sink(loss)[0] += 1.0;
  const auto last = static_cast<std::size_t>(loss.node_id());
  for (std::size_t i = last + 1; i-- > 0;) {
    Op& op = ops_[i];
    if (!op.output.has_grad()) continue;
    if (!op.backward) throw GraphError("taped op is missing its backward closure");
    op.backward(op.output);
  }
  // Release intermediates and closures; leaves keep their accumulated grads.
  ops_.clear();
  ops_.shrink_to_fit();
}

}  // namespace surgant
