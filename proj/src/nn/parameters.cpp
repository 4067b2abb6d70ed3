#include "mcpred/nn/parameters.hpp"

#include <cmath>
#include <stdexcept>

#include "mcpred/random.hpp"

namespace mcpred::nn {

ParamId ParameterStore::add(std::string name, Tensor value, ParamGroup group) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  params_.push_back(Parameter{std::move(name), std::move(value), group});
  return params_.size() - 1;
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

double ParameterStore::squared_norm() const {
  double s = 0.0;
  for (const auto& p : params_) {
    for (double v : p.value.values()) s += v * v;
  }
  return s;
}

bool ParameterStore::operator==(const ParameterStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.group != b.group || !(a.value == b.value)) return false;
  }
  return true;
}

GradientSet::GradientSet(const ParameterStore& params) : touched_(params.size(), false) {
  grads_.reserve(params.size());
  for (const auto& p : params.all()) {
    grads_.emplace_back(p.value.shape(), std::vector<double>(p.value.size(), 0.0));
  }
}

void GradientSet::absorb(GradientSet& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (!other.touched_[i]) continue;
    Tensor& dst = grads_[i];
    Tensor& src = other.grads_[i];
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    src.fill(0.0);
    other.touched_[i] = false;
    touched_[i] = true;
  }
}

void GradientSet::zero() {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (touched_[i]) grads_[i].fill(0.0);
    touched_[i] = false;
  }
}

bool GradientSet::all_finite() const {
  for (const auto& g : grads_) {
    if (!g.all_finite()) return false;
  }
  return true;
}

Tensor init_uniform(std::size_t rows, std::size_t cols, double bound, std::uint64_t seed, std::string_view name) {
  Rng rng(derive_seed(seed, name));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor init_xavier(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed, std::string_view name) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return init_uniform(fan_in, fan_out, bound, seed, name);
}

}  // namespace mcpred::nn
