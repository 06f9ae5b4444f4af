#include "tcl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tcl/kernels.hpp"

namespace tcl {

namespace {

thread_local GradientTape* t_active_tape = nullptr;

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NonFiniteError(std::string("non-finite value produced by op '") +
                           op + "'");
    }
  }
}

bool want_grad(std::initializer_list<const Tensor*> inputs) {
  if (t_active_tape == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor::Node& Tensor::node() const {
  if (!node_) throw TensorError("use of undefined tensor");
  return *node_;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("zero-sized dimension in " + shape_str(shape));
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->value.assign(shape_numel(t.node_->shape), 0.0);
  if (requires_grad) t.set_requires_grad(true);
  return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  Tensor t = zeros(std::move(shape), requires_grad);
  t.values() = std::move(values);
  return t;
}

const Shape& Tensor::shape() const { return node().shape; }
std::size_t Tensor::size() const { return node().value.size(); }

std::size_t Tensor::rows() const {
  if (shape().size() != 2) throw ShapeError("rows(): tensor is not 2-d");
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (shape().size() != 2) throw ShapeError("cols(): tensor is not 2-d");
  return shape()[1];
}

bool Tensor::requires_grad() const { return node().requires_grad; }

void Tensor::set_requires_grad(bool on) const {
  Node& n = node();
  n.requires_grad = on;
  if (on)
    n.grad.assign(n.value.size(), 0.0);
  else
    n.grad.clear();
}

std::vector<double>& Tensor::values() const { return node().value; }

std::vector<double>& Tensor::grad() const {
  if (!requires_grad()) throw TensorError("grad(): tensor does not track gradients");
  return node().grad;
}

void Tensor::zero_grad() const {
  if (requires_grad()) std::fill(node().grad.begin(), node().grad.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1)
    throw ShapeError("item(): tensor has " + std::to_string(size()) +
                     " elements");
  return values()[0];
}

// ---------------------------------------------------------------------------
// GradientTape
// ---------------------------------------------------------------------------

GradientTape::GradientTape() : prev_(t_active_tape) { t_active_tape = this; }

GradientTape::~GradientTape() { t_active_tape = prev_; }

GradientTape* GradientTape::active() { return t_active_tape; }

void GradientTape::record(std::function<void()> step) {
  steps_.push_back(std::move(step));
}

void GradientTape::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw TensorError("backward: loss must be a scalar, got shape " +
                      shape_str(loss.shape()));
  if (consumed_)
    throw TensorError("backward: tape already consumed; re-run the forward pass");
  if (!loss.requires_grad())
    throw TensorError("backward: loss does not depend on any tracked tensor");
  consumed_ = true;
  loss.grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

void backward(const Tensor& loss) {
  GradientTape* tape = GradientTape::active();
  if (!tape) throw TensorError("backward: no active gradient tape");
  tape->backward(loss);
}

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  kernels::add(a.values().data(), b.values().data(), out.values().data(),
               a.size());
  check_finite(out.values(), "add");
  if (want_grad({&a, &b})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, b, out]() {
      const std::size_t n = out.size();
      if (a.requires_grad())
        kernels::axpy(out.grad().data(), 1.0, a.grad().data(), n);
      if (b.requires_grad())
        kernels::axpy(out.grad().data(), 1.0, b.grad().data(), n);
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  kernels::sub(a.values().data(), b.values().data(), out.values().data(),
               a.size());
  check_finite(out.values(), "sub");
  if (want_grad({&a, &b})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, b, out]() {
      const std::size_t n = out.size();
      if (a.requires_grad())
        kernels::axpy(out.grad().data(), 1.0, a.grad().data(), n);
      if (b.requires_grad())
        kernels::axpy(out.grad().data(), -1.0, b.grad().data(), n);
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  kernels::mul(a.values().data(), b.values().data(), out.values().data(),
               a.size());
  check_finite(out.values(), "mul");
  if (want_grad({&a, &b})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, b, out]() {
      const std::size_t n = out.size();
      const double* up = out.grad().data();
      if (a.requires_grad()) {
        double* ga = a.grad().data();
        const double* bv = b.values().data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += up[i] * bv[i];
      }
      if (b.requires_grad()) {
        double* gb = b.grad().data();
        const double* av = a.values().data();
        for (std::size_t i = 0; i < n; ++i) gb[i] += up[i] * av[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  kernels::scale(a.values().data(), s, out.values().data(), a.size());
  check_finite(out.values(), "scale");
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out, s]() {
      kernels::axpy(out.grad().data(), s, a.grad().data(), a.size());
    });
  }
  return out;
}

Tensor div_by_scalar(const Tensor& a, const Tensor& b) {
  if (b.size() != 1)
    throw ShapeError("div_by_scalar: divisor must have one element");
  const double s = b.values()[0];
  Tensor out = Tensor::zeros(a.shape());
  kernels::scale(a.values().data(), 1.0 / s, out.values().data(), a.size());
  check_finite(out.values(), "div_by_scalar");
  if (want_grad({&a, &b})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, b, out, s]() {
      const std::size_t n = a.size();
      const double* up = out.grad().data();
      if (a.requires_grad())
        kernels::axpy(up, 1.0 / s, a.grad().data(), n);
      if (b.requires_grad()) {
        double acc = 0.0;
        const double* av = a.values().data();
        for (std::size_t i = 0; i < n; ++i) acc += up[i] * av[i];
        b.grad()[0] -= acc / (s * s);
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  kernels::relu(a.values().data(), out.values().data(), a.size());
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out]() {
      kernels::relu_backward(a.values().data(), out.grad().data(),
                             a.grad().data(), a.size());
    });
  }
  return out;
}

Tensor clamp_min(const Tensor& a, double m) {
  Tensor out = Tensor::zeros(a.shape());
  kernels::clamp_min(a.values().data(), m, out.values().data(), a.size());
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out, m]() {
      kernels::clamp_min_backward(a.values().data(), m, out.grad().data(),
                                  a.grad().data(), a.size());
    });
  }
  return out;
}

Tensor exp(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = std::exp(a.values()[i]);
  check_finite(out.values(), "exp");
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out]() {
      const std::size_t n = a.size();
      const double* up = out.grad().data();
      const double* ov = out.values().data();
      double* ga = a.grad().data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += up[i] * ov[i];
    });
  }
  return out;
}

Tensor log(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = std::log(a.values()[i]);
  check_finite(out.values(), "log");
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out]() {
      const std::size_t n = a.size();
      const double* up = out.grad().data();
      const double* av = a.values().data();
      double* ga = a.grad().data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += up[i] / av[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// matrix ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2)
    throw ShapeError("matmul: both operands must be 2-d");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw ShapeError("matmul: inner dimensions differ, " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out = Tensor::zeros({m, n});
  kernels::gemm(false, false, m, n, k, a.values().data(), b.values().data(),
                out.values().data(), false);
  check_finite(out.values(), "matmul");
  if (want_grad({&a, &b})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, b, out, m, n, k]() {
      if (a.requires_grad())  // dA = dC * B^T
        kernels::gemm(false, true, m, k, n, out.grad().data(),
                      b.values().data(), a.grad().data(), true);
      if (b.requires_grad())  // dB = A^T * dC
        kernels::gemm(true, false, k, n, m, a.values().data(),
                      out.grad().data(), b.grad().data(), true);
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2) throw ShapeError("transpose: tensor must be 2-d");
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out = Tensor::zeros({c, r});
  kernels::transpose(a.values().data(), out.values().data(), r, c);
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out, r, c]() {
      const double* up = out.grad().data();
      double* ga = a.grad().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += up[j * r + i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions (serial on purpose: a parallel sum would change the FP
// accumulation order and break bitwise reproducibility)
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  Tensor out = Tensor::scalar(acc);
  check_finite(out.values(), "sum");
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out]() {
      const double up = out.grad()[0];
      double* ga = a.grad().data();
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += up;
    });
  }
  return out;
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
  const auto& sh = a.shape();
  if (sh.size() == 1) {
    if (axis != 0) throw ShapeError("mean_axis: 1-d tensor has only axis 0");
    Tensor total = sum(a);
    return scale(total, 1.0 / static_cast<double>(a.size()));
  }
  if (sh.size() != 2 || axis > 1)
    throw ShapeError("mean_axis: expected a 1-d or 2-d tensor, axis 0 or 1");
  const std::size_t r = sh[0], c = sh[1];
  if (axis == 0) {
    Tensor out = Tensor::zeros({c});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.values()[j] += a.values()[i * c + j];
    for (std::size_t j = 0; j < c; ++j) out.values()[j] /= static_cast<double>(r);
    check_finite(out.values(), "mean_axis");
    if (want_grad({&a})) {
      out.set_requires_grad(true);
      t_active_tape->record([a, out, r, c]() {
        const double* up = out.grad().data();
        double* ga = a.grad().data();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            ga[i * c + j] += up[j] / static_cast<double>(r);
      });
    }
    return out;
  }
  Tensor out = Tensor::zeros({r});
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += a.values()[i * c + j];
    out.values()[i] = acc / static_cast<double>(c);
  }
  check_finite(out.values(), "mean_axis");
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out, r, c]() {
      const double* up = out.grad().data();
      double* ga = a.grad().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          ga[i * c + j] += up[i] / static_cast<double>(c);
    });
  }
  return out;
}

Tensor log_sum_exp(const Tensor& a) {
  const auto& v = a.values();
  if (v.empty()) throw ShapeError("log_sum_exp: empty tensor");
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  Tensor out = Tensor::scalar(m + std::log(s));
  check_finite(out.values(), "log_sum_exp");
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out, m, s]() {
      const double up = out.grad()[0];
      const double* av = a.values().data();
      double* ga = a.grad().data();
      for (std::size_t i = 0; i < a.size(); ++i)
        ga[i] += up * std::exp(av[i] - m) / s;
    });
  }
  return out;
}

Tensor l2_norm(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x * x;
  const double norm = std::sqrt(acc);
  Tensor out = Tensor::scalar(norm);
  check_finite(out.values(), "l2_norm");
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out, norm]() {
      const double up = out.grad()[0];
      const double denom = norm > 0.0 ? norm : 1.0;  // subgradient 0 at origin
      const double* av = a.values().data();
      double* ga = a.grad().data();
      for (std::size_t i = 0; i < a.size(); ++i)
        ga[i] += up * av[i] / denom;
    });
  }
  return out;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 1 || b.shape().size() != 1 || a.size() != b.size())
    throw ShapeError("dot: 1-d tensors of equal length required, " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += a.values()[i] * b.values()[i];
  Tensor out = Tensor::scalar(acc);
  check_finite(out.values(), "dot");
  if (want_grad({&a, &b})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, b, out]() {
      const double up = out.grad()[0];
      if (a.requires_grad())
        kernels::axpy(b.values().data(), up, a.grad().data(), a.size());
      if (b.requires_grad())
        kernels::axpy(a.values().data(), up, b.grad().data(), b.size());
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// layout ops
// ---------------------------------------------------------------------------

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t ndim = parts.front().shape().size();
  if (ndim != 1 && ndim != 2)
    throw ShapeError("concat: only 1-d and 2-d tensors supported");
  std::size_t lead = 0;
  for (const Tensor& p : parts) {
    if (p.shape().size() != ndim)
      throw ShapeError("concat: mixed ranks");
    if (ndim == 2 && p.cols() != parts.front().cols())
      throw ShapeError("concat: column counts differ");
    lead += p.shape()[0];
  }
  Shape out_shape = ndim == 1 ? Shape{lead} : Shape{lead, parts.front().cols()};
  Tensor out = Tensor::zeros(out_shape);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    std::copy(p.values().begin(), p.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
  }
  bool any_grad = false;
  if (t_active_tape)
    for (const Tensor& p : parts)
      if (p.requires_grad()) any_grad = true;
  if (any_grad) {
    out.set_requires_grad(true);
    std::vector<Tensor> held(parts.begin(), parts.end());
    t_active_tape->record([held = std::move(held), out]() {
      const double* up = out.grad().data();
      std::size_t offset = 0;
      for (const Tensor& p : held) {
        if (p.requires_grad())
          kernels::axpy(up + offset, 1.0, p.grad().data(), p.size());
        offset += p.size();
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  const auto& sh = a.shape();
  if (sh.empty() || sh.size() > 2)
    throw ShapeError("slice: only 1-d and 2-d tensors supported");
  if (begin >= end || end > sh[0])
    throw ShapeError("slice: invalid range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") for " + shape_str(sh));
  const std::size_t stride = sh.size() == 2 ? sh[1] : 1;
  Shape out_shape = sh.size() == 2 ? Shape{end - begin, stride}
                                   : Shape{end - begin};
  Tensor out = Tensor::zeros(out_shape);
  std::copy(a.values().begin() + static_cast<std::ptrdiff_t>(begin * stride),
            a.values().begin() + static_cast<std::ptrdiff_t>(end * stride),
            out.values().begin());
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out, begin, stride]() {
      kernels::axpy(out.grad().data(), 1.0,
                    a.grad().data() + begin * stride, out.size());
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  Tensor out = Tensor::from(std::move(shape), a.values());
  if (want_grad({&a})) {
    out.set_requires_grad(true);
    t_active_tape->record([a, out]() {
      kernels::axpy(out.grad().data(), 1.0, a.grad().data(), a.size());
    });
  }
  return out;
}

}  // namespace tcl
