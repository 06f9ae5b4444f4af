#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tcl {

// Finite-difference verification of the analytic gradients of every training
// objective, measured through a small encoder so the chain runs end to end
// (for the group loss that includes the path through the group means).
struct GradSuiteEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t instances = 0;
};

struct GradSuiteResult {
  std::vector<GradSuiteEntry> entries;
  bool all_passed(double tolerance = 1e-4) const;
};

// instances random instances per objective, batch sizes drawn from {2,3,4}
// and class counts from {3,8}.
GradSuiteResult run_gradient_suite(std::size_t instances, std::uint64_t seed);

}  // namespace tcl
