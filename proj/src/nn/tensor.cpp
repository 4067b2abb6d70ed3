#include "mcpred/nn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace mcpred::nn {

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  const std::size_t expected =
      std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  if (expected != values_.size()) throw std::invalid_argument("tensor value count does not match shape");
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

double Tensor::item() const {
  if (values_.size() != 1) throw std::logic_error("item() on a tensor with more than one value");
  return values_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

}  // namespace mcpred::nn
