#include "mcpred/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace mcpred::nn {

Var apply_dropout(Var x, const DropoutContext& drop) {
  if (!drop.active()) return x;
  return dropout(x, drop.rate, *drop.rng);
}

Var affine(Var x, Var w, Var b) { return add(matmul(x, w), b); }

EncoderLayerParams EncoderLayerParams::create(ParameterStore& store, const std::string& prefix,
                                              std::size_t d_model, std::size_t heads, std::size_t ffn,
                                              ParamGroup group, std::uint64_t seed) {
  if (heads == 0 || d_model % heads != 0) {
    throw std::invalid_argument("head count must divide the model dimension");
  }
  EncoderLayerParams p;
  p.d_model = d_model;
  p.heads = heads;
  p.ffn = ffn;
  auto weight = [&](const char* name, std::size_t in, std::size_t out) {
    const std::string full = prefix + "." + name;
    return store.add(full, init_xavier(in, out, seed, full), group);
  };
  auto constant = [&](const char* name, std::size_t cols, double v) {
    return store.add(prefix + "." + name, Tensor(1, cols, v), group);
  };
  p.wq = weight("wq", d_model, d_model);
  p.bq = constant("bq", d_model, 0.0);
  p.wk = weight("wk", d_model, d_model);
  p.bk = constant("bk", d_model, 0.0);
  p.wv = weight("wv", d_model, d_model);
  p.bv = constant("bv", d_model, 0.0);
  p.wo = weight("wo", d_model, d_model);
  p.bo = constant("bo", d_model, 0.0);
  p.w1 = weight("w1", d_model, ffn);
  p.b1 = constant("b1", ffn, 0.0);
  p.w2 = weight("w2", ffn, d_model);
  p.b2 = constant("b2", d_model, 0.0);
  p.ln1_gain = constant("ln1_gain", d_model, 1.0);
  p.ln1_bias = constant("ln1_bias", d_model, 0.0);
  p.ln2_gain = constant("ln2_gain", d_model, 1.0);
  p.ln2_bias = constant("ln2_bias", d_model, 0.0);
  return p;
}

Var multi_head_attention(Var x, const EncoderLayerParams& p, const Binder& bind, std::span<const bool> valid,
                         AttentionTrace* trace) {
  if (x.cols() != p.d_model) throw std::invalid_argument("attention input width differs from d_model");
  if (!valid.empty() && valid.size() != x.rows()) throw std::invalid_argument("mask length differs from sequence");
  const Var q = affine(x, bind(p.wq), bind(p.bq));
  const Var k = affine(x, bind(p.wk), bind(p.bk));
  const Var v = affine(x, bind(p.wv), bind(p.bv));
  const std::size_t hd = p.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  if (trace) trace->values = v.value();
  std::vector<Var> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Var qh = slice_cols(q, h * hd, hd);
    const Var kh = slice_cols(k, h * hd, hd);
    const Var vh = slice_cols(v, h * hd, hd);
    const Var logits = scale(matmul(qh, transpose(kh)), inv_sqrt);
    const Var probs = softmax_rows(logits, valid, valid);
    const Var ctx = matmul(probs, vh);
    if (trace) {
      trace->probs.push_back(probs.value());
      trace->context.push_back(ctx.value());
    }
    heads.push_back(ctx);
  }
  const Var joined = p.heads == 1 ? heads[0] : concat_cols(heads);
  return affine(joined, bind(p.wo), bind(p.bo));
}

Var encoder_layer(Var x, const EncoderLayerParams& p, const Binder& bind, std::span<const bool> valid,
                  const DropoutContext& drop, AttentionTrace* trace) {
  const Var attn = apply_dropout(multi_head_attention(x, p, bind, valid, trace), drop);
  const Var h1 = layer_norm(add(x, attn), bind(p.ln1_gain), bind(p.ln1_bias));
  const Var ff = affine(relu(affine(h1, bind(p.w1), bind(p.b1))), bind(p.w2), bind(p.b2));
  return layer_norm(add(h1, apply_dropout(ff, drop)), bind(p.ln2_gain), bind(p.ln2_bias));
}

}  // namespace mcpred::nn
