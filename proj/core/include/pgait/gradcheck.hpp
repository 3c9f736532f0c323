#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pgait/tensor.hpp"

namespace pgait {

struct GradCheckResult {
  bool passed = false;
  double max_rel_error = 0.0;
  /// Flat index of the worst element.
  std::int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

using ScalarFn = std::function<ad::Tensor<double>(const ad::Tensor<double>&)>;

/// Compares the reverse-mode gradient of `fn` at `input` with central
/// differences (f(x + eps) - f(x - eps)) / (2 eps). Relative error per
/// element is |a - n| / max(1, |a| + |n|).
GradCheckResult grad_check(const ScalarFn& fn, const ad::Tensor<double>& input, double eps = 1e-5,
                           double tol = 1e-4);

struct GradCheckCase {
  std::string name;   // primitive or composite checked
  std::string shape;  // the input shape it ran on
  GradCheckResult result;
};

/// Every differentiable primitive, each head building block and the full
/// masked-pooling -> GCN -> loss chain, three random shapes each.
std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, double tol = 1e-4);

}  // namespace pgait
