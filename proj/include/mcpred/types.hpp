#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcpred {

using Token = std::optional<std::string>;
using EntityId = std::string;

// Dependency relation between an event's verb and a chain protagonist.
enum class Role { subj, obj, iobj, none };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

// Coarse part-of-speech categories supplied by the upstream tagger.
enum class Pos { V, N, J, R, O };

char to_char(Pos pos);
Pos parse_pos(std::string_view text);

struct EventSpan {
  int event = 0;  // index of the mentioned event in the protagonist's raw chain
  int start = 0;  // half-open token range
  int end = 0;

  bool operator==(const EventSpan&) const = default;
};

// Source sentence of a chain event. `event_spans` lists the mentions of
// events from the same chain; `focus_event` names the one this sentence
// is attached to.
struct SentenceText {
  std::vector<std::string> tokens;
  std::vector<Pos> pos;
  int verb_index = 0;
  std::vector<EventSpan> event_spans;
  int focus_event = 0;

  // Throws DataError describing the first violated invariant.
  void validate() const;
  const EventSpan& focus_span() const;

  bool operator==(const SentenceText&) const = default;
};

struct Event {
  Token verb;
  Token a0;  // subject headword
  Token a1;  // object headword
  Token a2;  // indirect-object headword
  std::optional<SentenceText> sentence;
  Role role = Role::none;
  // Entity ids filling a0..a2. Always present on candidates, optional on
  // chain events (when present they drive role recomputation).
  std::array<std::optional<EntityId>, 3> participants;

  static Event null_event();
  bool is_null() const { return !verb && !a0 && !a1 && !a2; }
  bool has_participants() const;

  bool operator==(const Event&) const = default;
};

struct Chain {
  EntityId protagonist;
  std::vector<Event> events;  // narrative order

  bool operator==(const Chain&) const = default;
};

inline constexpr std::size_t kCandidateCount = 5;

struct Sample {
  std::string id;
  std::vector<Chain> entities;   // raw, unpadded; file order preserved
  std::vector<Event> candidates;
  int answer = 0;

  const Chain* find_entity(std::string_view eid) const;

  bool operator==(const Sample&) const = default;
};

enum class ScoreVariant { E, C, M, L };
enum class AttentionVariant { scaled_dot, dot, additive, avg };

std::string_view to_string(ScoreVariant v);
std::string_view to_string(AttentionVariant v);
ScoreVariant parse_score_variant(std::string_view text);
AttentionVariant parse_attention_variant(std::string_view text);

struct ModelConfig {
  std::size_t n = 8;
  std::size_t m = kCandidateCount;
  std::size_t d_w = 300;
  std::size_t d_e = 128;
  std::size_t chain_layers = 2;
  std::size_t chain_ffn = 1024;
  std::size_t chain_heads = 4;
  std::size_t text_layers = 2;
  std::size_t text_heads = 2;
  std::size_t text_ffn = 512;
  std::size_t max_text_len = 64;
  double dropout = 0.1;
  ScoreVariant score_variant = ScoreVariant::E;
  AttentionVariant attention_variant = AttentionVariant::scaled_dot;
  bool multi_chain = true;
  bool use_text = true;
  // Attention-mask null padding events inside the chain Transformer.
  bool mask_null_in_chain = false;
  // Drop null padding events from the attention-weighted chain score.
  bool mask_null_in_score = false;

  // Throws ConfigError.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Pads with null events up to n, or keeps the n most recent events.
Chain pad_chain(const Chain& chain, std::size_t n);

// subj/obj/iobj for the first slot (a0, a1, a2) the entity fills; none otherwise.
Role protagonist_role(const Event& event, std::string_view entity);

struct DerivedChain {
  int slot = 0;  // candidate participant slot 0..2
  Chain chain;   // padded to n, roles relative to chain.protagonist
};

// One padded chain per non-null participant slot of the candidate; in
// single-chain mode only the first one. Throws DataError("no protagonist")
// when every slot is null, or when an entity id does not resolve.
std::vector<DerivedChain> derive_chains(const Sample& sample, std::size_t candidate_index,
                                        std::size_t n, bool multi_chain);

}  // namespace mcpred
