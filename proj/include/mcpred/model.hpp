#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcpred/nn/autodiff.hpp"
#include "mcpred/nn/checkpoint.hpp"
#include "mcpred/nn/layers.hpp"
#include "mcpred/nn/parameters.hpp"
#include "mcpred/scoring.hpp"
#include "mcpred/text.hpp"
#include "mcpred/types.hpp"
#include "mcpred/vocabulary.hpp"

namespace mcpred::model {

// Vocabulary ids of (verb, a0, a1, a2); null slots map to [NULL].
using EventIds = std::array<TokenId, 4>;

EventIds event_ids(const Event& event, const Vocabulary& vocab);

struct EncodedEvent {
  EventIds ids{};
  bool is_null = true;
  std::optional<text::EncodedTokens> text;  // converted, masked, [CLS]-prefixed sentence
};

struct EncodedChain {
  EntityId entity;
  std::vector<EncodedEvent> events;  // exactly n
};

struct ChainRef {
  int slot = 0;
  std::size_t chain = 0;  // index into EncodedSample::chains
};

struct EncodedCandidate {
  EventIds ids{};
  std::vector<ChainRef> chains;
};

// Model-ready form of a Sample: padded chains (one per referenced entity),
// converted sentences, candidate ids and their chain terms.
struct EncodedSample {
  std::string id;
  std::vector<EncodedChain> chains;
  std::vector<EncodedCandidate> candidates;
  int answer = 0;
};

EncodedSample encode_sample(const Sample& sample, const Vocabulary& vocab, const ModelConfig& config,
                            const text::MaskSet& mask = {});
std::vector<EncodedSample> encode_corpus(const std::vector<Sample>& samples, const Vocabulary& vocab,
                                         const ModelConfig& config, const text::MaskSet& mask = {});

struct EventEncoderParams {
  nn::ParamId words = 0;  // vocab x d_w, shared with the text encoder
  nn::ParamId w_v = 0, w_a0 = 0, w_a1 = 0, w_a2 = 0;  // d_w x d_e
  nn::ParamId b_e = 0;                                // 1 x d_e
};

struct TextEncoderParams {
  nn::ParamId w_in = 0, b_in = 0;  // d_w -> d_e input projection
  nn::ParamId positions = 0;       // max_text_len x d_e
  std::vector<nn::EncoderLayerParams> layers;
};

struct ChainModelParams {
  nn::ParamId positions = 0;  // (n + 1) x d_e
  std::vector<nn::EncoderLayerParams> layers;
};

// tanh(W_v^T v + W_a0^T a0 + W_a1^T a1 + W_a2^T a2 + b_e) for each row of ids.
nn::Var encode_events(const nn::Binder& bind, const EventEncoderParams& p, std::span<const EventIds> ids);

// [CLS] output of the text encoder. Throws std::invalid_argument when ids
// do not start with [CLS].
nn::Var encode_text(const nn::Binder& bind, const EventEncoderParams& words, const TextEncoderParams& p,
                    const text::EncodedTokens& tokens, const nn::DropoutContext& drop);

// e + s, or e when the sentence embedding is absent.
nn::Var fuse_event_text(nn::Var e, std::optional<nn::Var> sentence);

struct HiddenChainVars {
  nn::Var h;    // n x d_e
  nn::Var h_c;  // 1 x d_e
};

// Appends the candidate, adds positions 0..n, runs the chain encoder.
// `valid` (length n + 1, may be empty) masks attention positions.
HiddenChainVars model_chain(const nn::Binder& bind, const ChainModelParams& p, nn::Var chain_embeddings,
                            nn::Var candidate_embedding, std::span<const bool> valid,
                            const nn::DropoutContext& drop);

struct HiddenChain {
  std::vector<std::vector<double>> h;
  std::vector<double> h_c;
};

HiddenChain to_hidden_chain(const HiddenChainVars& vars);

struct CandidateVars {
  nn::Var o;  // 1 x 1
  std::vector<scoring::ChainScoreVars> chains;
};

struct ForwardResult {
  nn::Var logits;  // 1 x m candidate scores o
  std::vector<CandidateVars> candidates;
};

class Model {
 public:
  Model(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  // Runtime switches that need no parameter changes.
  void set_use_text(bool on) { config_.use_text = on && has_text_encoder_; }
  void set_multi_chain(bool on) { config_.multi_chain = on; }
  bool has_text_encoder() const { return has_text_encoder_; }
  std::size_t vocab_size() const { return vocab_size_; }

  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }
  const EventEncoderParams& event_params() const { return event_; }
  const TextEncoderParams& text_params() const { return text_; }
  const ChainModelParams& chain_params() const { return chain_; }
  const scoring::ScoringParams& scoring_params() const { return scoring_; }

  ForwardResult forward(const nn::Binder& bind, const EncodedSample& sample, const nn::DropoutContext& drop) const;

  // Copies every parameter of `other` whose name exists here (shapes must agree).
  void copy_shared_parameters(const Model& other);

 private:
  ModelConfig config_;
  std::size_t vocab_size_;
  bool has_text_encoder_;
  nn::ParameterStore params_;
  EventEncoderParams event_;
  TextEncoderParams text_;
  ChainModelParams chain_;
  scoring::ScoringParams scoring_;
};

// Dropout-free evaluation of one sample.
scoring::ScoreBreakdown score_sample(const Model& model, const EncodedSample& sample);
scoring::ScoreBreakdown breakdown_from(const ForwardResult& result, const EncodedSample& sample);

// Checkpoint = parameters + metadata carrying the model config and vocabulary.
nn::CheckpointData make_checkpoint(const Model& model, const Vocabulary& vocab);
struct LoadedModel {
  Model model;
  Vocabulary vocab;
};
LoadedModel model_from_checkpoint(const nn::CheckpointData& data);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

// "token v1 ... v_dw" per line; rows for tokens outside the vocabulary are
// skipped. Returns the number of rows replaced.
std::size_t load_word_vectors(const std::string& path, const Vocabulary& vocab, Model& model);

}  // namespace mcpred::model
