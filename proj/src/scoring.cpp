#include "mcpred/scoring.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "mcpred/errors.hpp"

namespace mcpred::scoring {

namespace {

double dot(Vec a, Vec b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool all_valid(std::span<const bool> valid) {
  if (valid.empty()) return true;
  for (bool v : valid) {
    if (v) return false;
  }
  return true;  // every position masked: fall back to all positions
}

}  // namespace

double event_score(Vec h_i, Vec h_c, ScoreVariant variant, const ScoringWeights& weights) {
  if (h_i.size() != h_c.size()) throw std::invalid_argument("event_score: dimension mismatch");
  switch (variant) {
    case ScoreVariant::E: {
      double s = 0.0;
      for (std::size_t k = 0; k < h_i.size(); ++k) s += (h_i[k] - h_c[k]) * (h_i[k] - h_c[k]);
      return -std::sqrt(s);
    }
    case ScoreVariant::M: {
      double s = 0.0;
      for (std::size_t k = 0; k < h_i.size(); ++k) s += std::fabs(h_i[k] - h_c[k]);
      return -s;
    }
    case ScoreVariant::C: {
      const double na = std::sqrt(dot(h_i, h_i));
      const double nb = std::sqrt(dot(h_c, h_c));
      if (na == 0.0 || nb == 0.0) throw NumericError("undefined cosine");
      return dot(h_i, h_c) / (na * nb);
    }
    case ScoreVariant::L:
      if (weights.w_se.size() != h_i.size() || weights.w_sc.size() != h_c.size()) {
        throw std::invalid_argument("event_score: L-Score weights missing");
      }
      return dot(weights.w_se, h_i) + dot(weights.w_sc, h_c) + weights.b_s;
  }
  return 0.0;
}

std::vector<double> attention_logits(std::span<const std::vector<double>> h, Vec h_c, AttentionVariant variant,
                                     const ScoringWeights& weights) {
  std::vector<double> u;
  if (variant == AttentionVariant::avg) return u;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(h_c.size()));
  for (const auto& hi : h) {
    if (hi.size() != h_c.size()) throw std::invalid_argument("attention_logits: dimension mismatch");
    switch (variant) {
      case AttentionVariant::scaled_dot: u.push_back(dot(hi, h_c) * inv_sqrt); break;
      case AttentionVariant::dot: u.push_back(dot(hi, h_c)); break;
      case AttentionVariant::additive:
        if (weights.w_ae.size() != hi.size() || weights.w_ac.size() != h_c.size()) {
          throw std::invalid_argument("attention_logits: additive weights missing");
        }
        u.push_back(dot(weights.w_ae, hi) + dot(weights.w_ac, h_c) + weights.b_a);
        break;
      case AttentionVariant::avg: break;
    }
  }
  return u;
}

std::vector<double> attention_weights(std::span<const std::vector<double>> h, Vec h_c, AttentionVariant variant,
                                      const ScoringWeights& weights, std::span<const bool> valid) {
  const std::size_t n = h.size();
  if (n == 0) throw std::invalid_argument("attention_weights: empty chain");
  if (!valid.empty() && valid.size() != n) throw std::invalid_argument("attention_weights: mask length");
  const bool unmasked = all_valid(valid);
  auto ok = [&](std::size_t i) { return unmasked || valid[i]; };
  std::vector<double> alpha(n, 0.0);
  if (variant == AttentionVariant::avg) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += ok(i) ? 1 : 0;
    for (std::size_t i = 0; i < n; ++i) alpha[i] = ok(i) ? 1.0 / static_cast<double>(count) : 0.0;
    return alpha;
  }
  const auto u = attention_logits(h, h_c, variant, weights);
  std::vector<double> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (ok(i)) kept.push_back(u[i]);
  }
  const auto p = nn::softmax(kept);
  for (std::size_t i = 0, k = 0; i < n; ++i) {
    if (ok(i)) alpha[i] = p[k++];
  }
  return alpha;
}

double chain_score(Vec s, Vec alpha) {
  if (s.size() != alpha.size()) throw std::invalid_argument("chain_score: length mismatch");
  return dot(alpha, s);
}

double aggregate_multichain(Vec f_terms) {
  if (f_terms.empty()) throw std::invalid_argument("aggregate_multichain: no chain scores");
  double o = f_terms[0];
  for (std::size_t j = 1; j < f_terms.size(); ++j) o += f_terms[j];
  return o;
}

std::vector<double> candidate_distribution(Vec o) {
  if (o.size() < 2) throw std::invalid_argument("candidate_distribution: need at least two candidates");
  return nn::softmax(o);
}

std::size_t predict(Vec pr) {
  if (pr.empty()) throw std::invalid_argument("predict: empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < pr.size(); ++i) {
    if (pr[i] > pr[best]) best = i;
  }
  return best;
}

std::string breakdown_json_lines(const std::string& sample_id, const ScoreBreakdown& breakdown,
                                 std::optional<int> answer) {
  using Json = nlohmann::ordered_json;
  std::string out;
  for (std::size_t i = 0; i < breakdown.candidates.size(); ++i) {
    const auto& cand = breakdown.candidates[i];
    Json chains = Json::array();
    for (const auto& ch : cand.chains) {
      Json c = Json::object();
      c["slot"] = ch.slot;
      c["entity"] = ch.entity;
      c["s"] = ch.s;
      c["u"] = ch.u.empty() ? Json(nullptr) : Json(ch.u);
      c["alpha"] = ch.alpha;
      c["f"] = ch.f;
      chains.push_back(std::move(c));
    }
    Json line = Json::object();
    line["sample"] = sample_id;
    line["candidate"] = i;
    line["o"] = cand.o;
    line["pr"] = breakdown.pr.at(i);
    line["predicted"] = i == breakdown.prediction;
    if (answer) line["gold"] = static_cast<int>(i) == *answer;
    line["chains"] = std::move(chains);
    out += line.dump();
    out += '\n';
  }
  return out;
}

ScoringParams ScoringParams::create(nn::ParameterStore& store, const ModelConfig& config, std::uint64_t seed) {
  ScoringParams p;
  const std::size_t d = config.d_e;
  auto vec = [&](const char* name) {
    auto w = nn::init_xavier(d, 1, seed, name);
    return store.add(name, nn::Tensor({1, d}, std::vector<double>(w.values().begin(), w.values().end())));
  };
  if (config.score_variant == ScoreVariant::L) {
    p.w_se = vec("score.w_se");
    p.w_sc = vec("score.w_sc");
    p.b_s = store.add("score.b_s", nn::Tensor(1, 1, 0.0));
  }
  if (config.attention_variant == AttentionVariant::additive) {
    p.w_ae = vec("attention.w_ae");
    p.w_ac = vec("attention.w_ac");
    p.b_a = store.add("attention.b_a", nn::Tensor(1, 1, 0.0));
  }
  return p;
}

ChainScoreVars score_chain(nn::Var h, nn::Var h_c, const ModelConfig& config, const ScoringParams& params,
                           const nn::Binder& bind, std::span<const bool> valid) {
  using namespace nn;
  const std::size_t n = h.rows();
  if (h.cols() != h_c.cols() || h_c.rows() != 1) throw std::invalid_argument("score_chain: shape mismatch");
  if (!valid.empty() && valid.size() != n) throw std::invalid_argument("score_chain: mask length");

  ChainScoreVars out;
  switch (config.score_variant) {
    case ScoreVariant::E: {
      const Var diff = sub(h, h_c);
      out.s = scale(sqrt(row_sum(mul(diff, diff))), -1.0);
      break;
    }
    case ScoreVariant::M:
      out.s = scale(row_sum(abs(sub(h, h_c))), -1.0);
      break;
    case ScoreVariant::C: {
      const Var dots = matmul(h, transpose(h_c));
      const Var norms = sqrt(row_sum(mul(h, h)));
      const Var norm_c = sqrt(sum(mul(h_c, h_c)));
      if (norm_c.value().item() == 0.0) throw NumericError("undefined cosine");
      for (double v : norms.value().values()) {
        if (v == 0.0) throw NumericError("undefined cosine");
      }
      out.s = div(dots, mul(norms, norm_c));
      break;
    }
    case ScoreVariant::L:
      out.s = add(matmul(h, transpose(bind(*params.w_se))),
                  add(matmul(h_c, transpose(bind(*params.w_sc))), bind(*params.b_s)));
      break;
  }

  const bool unmasked = all_valid(valid);
  std::span<const bool> key_mask = unmasked ? std::span<const bool>{} : valid;
  if (config.attention_variant == AttentionVariant::avg) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += (unmasked || valid[i]) ? 1 : 0;
    Tensor a(n, 1);
    for (std::size_t i = 0; i < n; ++i) a[i] = (unmasked || valid[i]) ? 1.0 / static_cast<double>(count) : 0.0;
    out.alpha = h.tape->constant(std::move(a));
  } else {
    Var u;
    switch (config.attention_variant) {
      case AttentionVariant::scaled_dot:
        u = scale(matmul(h, transpose(h_c)), 1.0 / std::sqrt(static_cast<double>(h.cols())));
        break;
      case AttentionVariant::dot:
        u = matmul(h, transpose(h_c));
        break;
      case AttentionVariant::additive:
        u = add(matmul(h, transpose(bind(*params.w_ae))),
                add(matmul(h_c, transpose(bind(*params.w_ac))), bind(*params.b_a)));
        break;
      case AttentionVariant::avg: break;
    }
    out.u = u;
    out.alpha = transpose(softmax_rows(transpose(u), key_mask));
  }
  out.f = sum(mul(out.alpha, out.s));
  return out;
}

nn::Var aggregate_terms(std::span<const nn::Var> f_terms) {
  if (f_terms.empty()) throw std::invalid_argument("aggregate_terms: no chain scores");
  nn::Var o = f_terms[0];
  for (std::size_t j = 1; j < f_terms.size(); ++j) o = nn::add(o, f_terms[j]);
  return o;
}

}  // namespace mcpred::scoring
