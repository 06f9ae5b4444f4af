#include "tcl/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace tcl {

std::vector<double> finite_difference_gradient(
    const std::function<double(const Tensor&)>& f, const Tensor& x,
    double step) {
  if (!(step > 0.0))
    throw std::invalid_argument("finite_difference_gradient: step must be > 0");
  Tensor probe = Tensor::from(x.shape(), x.values());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = probe.values()[i];
    probe.values()[i] = original + step;
    const double hi = f(probe);
    probe.values()[i] = original - step;
    const double lo = f(probe);
    probe.values()[i] = original;
    if (!std::isfinite(hi) || !std::isfinite(lo))
      throw NonFiniteError("finite_difference_gradient: non-finite evaluation");
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

double max_relative_error(const std::vector<double>& analytic,
                          const std::vector<double>& numeric) {
  if (analytic.size() != numeric.size())
    throw std::invalid_argument("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

double gradient_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                      double step) {
  x.set_requires_grad(true);
  std::vector<double> analytic;
  {
    GradientTape tape;
    Tensor loss = f(x);
    tape.backward(loss);
    analytic = x.grad();
  }
  auto value_of = [&f](const Tensor& probe) { return f(probe).item(); };
  std::vector<double> numeric = finite_difference_gradient(value_of, x, step);
  return max_relative_error(analytic, numeric);
}

double parameter_gradient_check(const std::function<Tensor()>& forward,
                                const Tensor& param, double step) {
  if (!param.requires_grad())
    throw TensorError("parameter_gradient_check: param does not track gradients");
  param.zero_grad();
  std::vector<double> analytic;
  {
    GradientTape tape;
    Tensor loss = forward();
    if (loss.requires_grad()) {
      tape.backward(loss);
      analytic = param.grad();
    } else {
      // constant objective (e.g. a degenerate contrastive batch)
      analytic.assign(param.size(), 0.0);
    }
  }
  auto value_at = [&](const Tensor& probe) {
    std::vector<double> saved = param.values();
    param.values() = probe.values();
    double v;
    try {
      v = forward().item();
    } catch (...) {
      param.values() = std::move(saved);
      throw;
    }
    param.values() = std::move(saved);
    return v;
  };
  std::vector<double> numeric = finite_difference_gradient(value_at, param, step);
  return max_relative_error(analytic, numeric);
}

}  // namespace tcl
