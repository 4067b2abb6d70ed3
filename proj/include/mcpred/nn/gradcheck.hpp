#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "mcpred/nn/parameters.hpp"

namespace mcpred::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;   // at the worst coordinate
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares `analytic` against central differences (f(p+e) - f(p-e)) / 2e
// on every coordinate of every parameter; relative error is
// |a - b| / max(1e-8, |a| + |b|), taken as 0 when |a - b| <= 1e-9. `loss`
// must be deterministic: it is evaluated twice up front and a mismatch
// throws NumericError. Parameter values are restored exactly afterwards.
GradCheckResult finite_difference_check(const std::function<double()>& loss, ParameterStore& params,
                                        const GradientSet& analytic, double epsilon = 1e-5);

}  // namespace mcpred::nn
