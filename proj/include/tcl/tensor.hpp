#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public TensorError {
 public:
  using TensorError::TensorError;
};

// Raised whenever a forward op produces NaN/Inf; the step aborts instead of
// letting the value propagate.
class NonFiniteError : public TensorError {
 public:
  using TensorError::TensorError;
};

// Dense double-precision array with optional gradient storage. A Tensor is a
// shared handle: copies alias the same node, and accessors are const because
// constness of the handle does not propagate to the storage (same semantics
// as a shared_ptr). Backward closures therefore capture plain copies.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rows() const;  // 2-d only
  std::size_t cols() const;  // 2-d only

  bool requires_grad() const;
  void set_requires_grad(bool on) const;

  std::vector<double>& values() const;
  std::vector<double>& grad() const;
  void zero_grad() const;

  double item() const;  // single-element tensors only

  // Stable identity of the underlying storage.
  const void* id() const { return node_.get(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
  Node& node() const;
};

// Ordered record of the ops applied during a forward pass. Ops append their
// backward step as they execute, which makes the record topologically
// ordered by construction; backward() replays it exactly once in reverse.
// One tape is active per thread at a time (RAII scoping), so independent
// runs on separate threads never share state.
class GradientTape {
 public:
  GradientTape();
  ~GradientTape();
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  static GradientTape* active();

  void record(std::function<void()> step);
  std::size_t size() const { return steps_.size(); }
  bool consumed() const { return consumed_; }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  // requires_grad tensor reachable from the record.
  void backward(const Tensor& loss);

 private:
  std::vector<std::function<void()>> steps_;
  bool consumed_ = false;
  GradientTape* prev_ = nullptr;
};

// Backward on the currently active tape.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Ops. All enforce exact shape agreement; the only broadcast is the explicit
// scalar-tensor form div_by_scalar. Every op checks its output for NaN/Inf.
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// b must have exactly one element; gradients flow to both operands.
Tensor div_by_scalar(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor clamp_min(const Tensor& a, double m);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sum(const Tensor& a);
// 2-d: axis 0 -> column means, axis 1 -> row means. 1-d: axis 0 -> scalar.
Tensor mean_axis(const Tensor& a, std::size_t axis);
// max(x) + log(sum(exp(x - max(x)))) over all elements.
Tensor log_sum_exp(const Tensor& a);
Tensor l2_norm(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
// Along axis 0. 1-d inputs chain; 2-d inputs stack rows.
Tensor concat(std::span<const Tensor> parts);
// Rows [begin, end) of a 2-d tensor, or elements [begin, end) of a 1-d one.
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);

}  // namespace tcl
