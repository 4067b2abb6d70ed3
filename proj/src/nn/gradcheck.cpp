#include "mcpred/nn/gradcheck.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "mcpred/errors.hpp"

namespace mcpred::nn {

namespace {
constexpr double kAbsoluteFloor = 1e-9;
}  // namespace

GradCheckResult finite_difference_check(const std::function<double()>& loss, ParameterStore& params,
                                        const GradientSet& analytic, double epsilon) {
  const double first = loss();
  const double second = loss();
  if (std::bit_cast<std::uint64_t>(first) != std::bit_cast<std::uint64_t>(second)) {
    throw NumericError("gradient check: loss function is not deterministic");
  }
  if (analytic.size() != params.size()) throw NumericError("gradient check: gradient set does not match parameters");

  GradCheckResult result;
  for (ParamId id = 0; id < params.size(); ++id) {
    Tensor& value = params[id].value;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double saved = value[k];
      value[k] = saved + epsilon;
      const double up = loss();
      value[k] = saved - epsilon;
      const double down = loss();
      value[k] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[id][k];
      const double gap = std::fabs(a - numeric);
      // Gaps below the central-difference rounding floor count as agreement.
      const double rel = gap <= kAbsoluteFloor ? 0.0 : gap / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
      if (!std::isfinite(rel)) throw NumericError("gradient check: non-finite value at " + params[id].name);
      ++result.coordinates;
      if (result.worst_parameter.empty() || rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = params[id].name;
        result.worst_index = k;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace mcpred::nn
