#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mcpred::nn {

// Dense row-major float64 tensor. Every tensor the model touches is
// rank 2; vectors are 1 x d rows and scalars are 1 x 1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : shape_{rows, cols}, values_(rows * cols, fill) {}
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor row(std::vector<double> values);
  static Tensor scalar(double value) { return Tensor(1, 1, value); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::size_t rows() const { return shape_.empty() ? 0 : (shape_.size() == 1 ? 1 : shape_[0]); }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> row_span(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }
  std::span<double> row_span(std::size_t r) { return {values_.data() + r * cols(), cols()}; }

  // The single value of a 1 x 1 tensor.
  double item() const;
  bool all_finite() const;
  void fill(double v);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

}  // namespace mcpred::nn
