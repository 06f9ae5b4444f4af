#pragma once

#include <functional>
#include <vector>

#include "tcl/tensor.hpp"

namespace tcl {

// Central finite differences: (f(x + h e_i) - f(x - h e_i)) / 2h per
// coordinate. f must be deterministic; evaluations run without a tape.
std::vector<double> finite_difference_gradient(
    const std::function<double(const Tensor&)>& f, const Tensor& x,
    double step);

// max_i |a_i - n_i| / max(1, |a_i|, |n_i|) over paired coordinates.
double max_relative_error(const std::vector<double>& analytic,
                          const std::vector<double>& numeric);

// Runs f under a fresh tape, backpropagates from its scalar output and
// compares x's accumulated gradient against finite differences.
double gradient_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                      double step = 1e-5);

// Same check for a tensor that lives inside a model: forward() reads param
// wherever it currently is, and the numeric side perturbs param in place.
double parameter_gradient_check(const std::function<Tensor()>& forward,
                                const Tensor& param, double step = 1e-5);

}  // namespace tcl
