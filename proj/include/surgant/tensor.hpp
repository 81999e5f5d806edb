#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace surgant {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  // Position in the producing graph's tape; -1 for leaves.
  std::int64_t node_id = -1;
  const void* graph = nullptr;
};

/// Shared handle to a dense row-major 64-bit tensor. Copies alias the same
/// storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                       bool requires_grad = false);
  static Tensor vector(std::vector<double> data, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }
  // 2-D views; a rank-1 tensor of length n reads as 1 x n.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() const;
  void zero_grad();
  void clear_grad() { node_->grad.clear(); }

  std::int64_t node_id() const { return node_->node_id; }
  const TensorNode* id() const { return node_.get(); }
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  Tensor clone() const;

 private:
  friend class Graph;
  friend std::span<double> grad_sink(const Tensor& t);
  std::shared_ptr<TensorNode> node_;
};

/// Tape of recorded operations. Backward walks the tape in exact reverse of
/// recording order and may run only once per tape.
class Graph {
 public:
  using BackwardFn = std::function<void(const Tensor& output)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return ops_.size(); }

  // Creates an op output. It is taped (and requires grad) only when grad is
  // enabled and some input requires grad; the caller must then hand the
  // backward closure to set_backward() before recording anything else.
  Tensor record(Shape shape, std::vector<double> data,
                std::initializer_list<const Tensor*> inputs);
  Tensor record(Shape shape, std::vector<double> data, std::span<const Tensor> inputs);
  void set_backward(BackwardFn fn);

  void backward(const Tensor& loss);
  bool consumed() const { return consumed_; }

 private:
  struct Op {
    Tensor output;
    BackwardFn backward;
  };
  Tensor make_output(Shape shape, std::vector<double> data, bool track);
  void note_input(const Tensor& t, bool& track);

  std::vector<Op> ops_;
  std::vector<Tensor> leaves_;
  std::unordered_set<const TensorNode*> leaf_ids_;
  bool grad_enabled_;
  bool consumed_ = false;
};

// Grad accumulation target for backward closures; allocates on first use.
std::span<double> grad_sink(const Tensor& t);

}  // namespace surgant
