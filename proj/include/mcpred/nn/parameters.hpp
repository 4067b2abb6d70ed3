#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcpred/nn/autodiff.hpp"
#include "mcpred/nn/tensor.hpp"

namespace mcpred::nn {

// Learning-rate group a parameter belongs to.
enum class ParamGroup { main, text };

struct Parameter {
  std::string name;
  Tensor value;
  ParamGroup group = ParamGroup::main;
};

using ParamId = std::size_t;

// Named, ordered collection of trainable tensors.
class ParameterStore {
 public:
  // Throws std::invalid_argument for a duplicate name.
  ParamId add(std::string name, Tensor value, ParamGroup group = ParamGroup::main);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](ParamId id) { return params_[id]; }
  const Parameter& operator[](ParamId id) const { return params_[id]; }
  std::optional<ParamId> find(std::string_view name) const;
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  std::size_t scalar_count() const;
  double squared_norm() const;

  // Deep value equality including names and groups.
  bool operator==(const ParameterStore& other) const;

 private:
  std::vector<Parameter> params_;
};

// Per-parameter gradient buffers, shaped like a ParameterStore.
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(const ParameterStore& params);

  std::size_t size() const { return grads_.size(); }
  // Marks the buffer as written and returns it.
  Tensor& sink(ParamId id) {
    touched_[id] = true;
    return grads_[id];
  }
  const Tensor& operator[](ParamId id) const { return grads_[id]; }
  Tensor& operator[](ParamId id) { return grads_[id]; }
  bool touched(ParamId id) const { return touched_[id]; }

  // Adds the touched buffers of `other` in parameter order, then zeroes them.
  void absorb(GradientSet& other);
  void zero();
  bool all_finite() const;

 private:
  std::vector<Tensor> grads_;
  std::vector<bool> touched_;
};

// Binds parameters onto one tape, routing gradients to a GradientSet.
class Binder {
 public:
  Binder(Tape& tape, const ParameterStore& params, GradientSet* grads)
      : tape_(tape), params_(params), grads_(grads) {}

  Var operator()(ParamId id) const {
    return tape_.leaf(params_[id].value, grads_ != nullptr ? &grads_->sink(id) : nullptr);
  }
  Tape& tape() const { return tape_; }
  const ParameterStore& params() const { return params_; }

 private:
  Tape& tape_;
  const ParameterStore& params_;
  GradientSet* grads_;
};

// Initialisers. Each draws from a stream derived from (seed, name) so a
// parameter's initial value does not depend on what else was created.
Tensor init_uniform(std::size_t rows, std::size_t cols, double bound, std::uint64_t seed, std::string_view name);
// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor init_xavier(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed, std::string_view name);

}  // namespace mcpred::nn
