#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcpred/nn/autodiff.hpp"
#include "mcpred/nn/parameters.hpp"
#include "mcpred/types.hpp"

namespace mcpred::scoring {

// Weights of the learned score (L) and additive attention variants.
// Unused entries stay empty.
struct ScoringWeights {
  std::vector<double> w_se, w_sc;
  double b_s = 0.0;
  std::vector<double> w_ae, w_ac;
  double b_a = 0.0;
};

using Vec = std::span<const double>;

// E: -|h_i - h_c|_2, C: cosine, M: -|h_i - h_c|_1, L: w_se.h_i + w_sc.h_c + b_s.
// Throws NumericError("undefined cosine") for C with a zero vector.
double event_score(Vec h_i, Vec h_c, ScoreVariant variant, const ScoringWeights& weights = {});

// u_i per variant; avg has no logits and returns an empty vector.
std::vector<double> attention_logits(std::span<const std::vector<double>> h, Vec h_c, AttentionVariant variant,
                                     const ScoringWeights& weights = {});

// softmax(u) over valid positions (avg: 1/n over valid positions).
// Masked positions get weight 0; an empty or all-false mask means all valid.
std::vector<double> attention_weights(std::span<const std::vector<double>> h, Vec h_c, AttentionVariant variant,
                                      const ScoringWeights& weights = {}, std::span<const bool> valid = {});

// f = sum_i alpha_i s_i. Throws std::invalid_argument on a length mismatch.
double chain_score(Vec s, Vec alpha);

// o = sum of per-chain scores; a single term is returned unchanged.
// Throws std::invalid_argument when empty.
double aggregate_multichain(Vec f_terms);

std::vector<double> candidate_distribution(Vec o);

// argmax, lowest index on ties.
std::size_t predict(Vec pr);

struct ChainScore {
  int slot = 0;
  std::string entity;
  std::vector<double> s, u, alpha;
  double f = 0.0;
};

struct CandidateScore {
  std::vector<ChainScore> chains;
  double o = 0.0;
};

struct ScoreBreakdown {
  std::vector<CandidateScore> candidates;
  std::vector<double> pr;
  std::size_t prediction = 0;
};

// One JSON object per candidate, newline terminated.
std::string breakdown_json_lines(const std::string& sample_id, const ScoreBreakdown& breakdown,
                                 std::optional<int> answer);

// ---- tape-recorded scoring -------------------------------------------------

struct ScoringParams {
  std::optional<nn::ParamId> w_se, w_sc, b_s;
  std::optional<nn::ParamId> w_ae, w_ac, b_a;

  // Registers only what the configured variants need.
  static ScoringParams create(nn::ParameterStore& store, const ModelConfig& config, std::uint64_t seed);
};

struct ChainScoreVars {
  nn::Var s;      // n x 1
  nn::Var alpha;  // n x 1
  nn::Var f;      // 1 x 1
  std::optional<nn::Var> u;  // n x 1, absent for avg
};

// h: n x d hidden states of the history, h_c: 1 x d candidate state.
ChainScoreVars score_chain(nn::Var h, nn::Var h_c, const ModelConfig& config, const ScoringParams& params,
                           const nn::Binder& bind, std::span<const bool> valid = {});

// Sums 1 x 1 terms in order; a single term is returned as is.
nn::Var aggregate_terms(std::span<const nn::Var> f_terms);

}  // namespace mcpred::scoring
