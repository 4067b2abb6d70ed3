#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcpred/nn/autodiff.hpp"
#include "mcpred/nn/parameters.hpp"

namespace mcpred {
class Rng;
}

namespace mcpred::nn {

// Dropout switch threaded through a forward pass. Inactive (or rate 0)
// makes every layer a pure function of its inputs.
struct DropoutContext {
  double rate = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rate > 0.0 && rng != nullptr; }
};

Var apply_dropout(Var x, const DropoutContext& drop);

// x W + b for x (rows x in), W (in x out), b (1 x out).
Var affine(Var x, Var w, Var b);

// Parameters of one post-norm Transformer encoder layer. The query, key,
// value and output projections are d x d; head h owns columns
// [h * d / heads, (h + 1) * d / heads).
struct EncoderLayerParams {
  std::size_t d_model = 0;
  std::size_t heads = 0;
  std::size_t ffn = 0;
  ParamId wq = 0, bq = 0, wk = 0, bk = 0, wv = 0, bv = 0, wo = 0, bo = 0;
  ParamId w1 = 0, b1 = 0, w2 = 0, b2 = 0;
  ParamId ln1_gain = 0, ln1_bias = 0, ln2_gain = 0, ln2_bias = 0;

  std::size_t head_dim() const { return d_model / heads; }

  // Registers "<prefix>.wq" etc. Throws std::invalid_argument when heads
  // does not divide d_model.
  static EncoderLayerParams create(ParameterStore& store, const std::string& prefix, std::size_t d_model,
                                   std::size_t heads, std::size_t ffn, ParamGroup group, std::uint64_t seed);
};

// Intermediate values of one attention block, for inspection and tests.
struct AttentionTrace {
  std::vector<Tensor> probs;    // per head, seq x seq
  std::vector<Tensor> context;  // per head, seq x head_dim (before the output projection)
  Tensor values;                // seq x d_model value projection
};

// Multi-head scaled dot-product self-attention over the valid positions.
// Masked positions neither attend nor are attended to.
Var multi_head_attention(Var x, const EncoderLayerParams& p, const Binder& bind, std::span<const bool> valid,
                         AttentionTrace* trace = nullptr);

// Attention, residual, layer norm, ReLU feed-forward, residual, layer norm.
Var encoder_layer(Var x, const EncoderLayerParams& p, const Binder& bind, std::span<const bool> valid,
                  const DropoutContext& drop, AttentionTrace* trace = nullptr);

}  // namespace mcpred::nn
