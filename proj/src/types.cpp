#include "mcpred/types.hpp"

#include <algorithm>
#include <string>

#include "mcpred/errors.hpp"

namespace mcpred {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::subj: return "subj";
    case Role::obj: return "obj";
    case Role::iobj: return "iobj";
    case Role::none: return "none";
  }
  return "none";
}

Role parse_role(std::string_view text) {
  if (text == "subj") return Role::subj;
  if (text == "obj") return Role::obj;
  if (text == "iobj") return Role::iobj;
  if (text == "none") return Role::none;
  throw DataError("unknown role '" + std::string(text) + "'");
}

char to_char(Pos pos) {
  switch (pos) {
    case Pos::V: return 'V';
    case Pos::N: return 'N';
    case Pos::J: return 'J';
    case Pos::R: return 'R';
    case Pos::O: return 'O';
  }
  return 'O';
}

Pos parse_pos(std::string_view text) {
  if (text == "V") return Pos::V;
  if (text == "N") return Pos::N;
  if (text == "J") return Pos::J;
  if (text == "R") return Pos::R;
  if (text == "O") return Pos::O;
  throw DataError("unknown POS tag '" + std::string(text) + "'");
}

void SentenceText::validate() const {
  const int len = static_cast<int>(tokens.size());
  if (tokens.empty()) throw DataError("sentence has no tokens");
  if (pos.size() != tokens.size()) throw DataError("pos and tokens differ in length");
  if (verb_index < 0 || verb_index >= len) throw DataError("verb_index out of bounds");
  bool focus_seen = false;
  for (const auto& span : event_spans) {
    if (span.start >= span.end) throw DataError("empty or inverted span");
    if (span.start < 0 || span.end > len) throw DataError("span out of bounds");
    if (span.event == focus_event) {
      if (focus_seen) throw DataError("focus event listed twice");
      focus_seen = true;
      if (verb_index < span.start || verb_index >= span.end) {
        throw DataError("focus span does not contain verb_index");
      }
    }
  }
  if (!focus_seen) throw DataError("focus event has no span");
  std::vector<EventSpan> sorted = event_spans;
  std::sort(sorted.begin(), sorted.end(),
            [](const EventSpan& a, const EventSpan& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].start < sorted[i - 1].end) throw DataError("overlapping event spans");
  }
}

const EventSpan& SentenceText::focus_span() const {
  for (const auto& span : event_spans) {
    if (span.event == focus_event) return span;
  }
  throw DataError("focus event has no span");
}

Event Event::null_event() { return Event{}; }

bool Event::has_participants() const {
  return std::any_of(participants.begin(), participants.end(),
                     [](const auto& p) { return p.has_value(); });
}

const Chain* Sample::find_entity(std::string_view eid) const {
  for (const auto& chain : entities) {
    if (chain.protagonist == eid) return &chain;
  }
  return nullptr;
}

std::string_view to_string(ScoreVariant v) {
  switch (v) {
    case ScoreVariant::E: return "E";
    case ScoreVariant::C: return "C";
    case ScoreVariant::M: return "M";
    case ScoreVariant::L: return "L";
  }
  return "E";
}

std::string_view to_string(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::scaled_dot: return "scaled_dot";
    case AttentionVariant::dot: return "dot";
    case AttentionVariant::additive: return "additive";
    case AttentionVariant::avg: return "avg";
  }
  return "scaled_dot";
}

ScoreVariant parse_score_variant(std::string_view text) {
  if (text == "E") return ScoreVariant::E;
  if (text == "C") return ScoreVariant::C;
  if (text == "M") return ScoreVariant::M;
  if (text == "L") return ScoreVariant::L;
  throw ConfigError("unknown score variant '" + std::string(text) + "' (expected E|C|M|L)");
}

AttentionVariant parse_attention_variant(std::string_view text) {
  if (text == "scaled_dot") return AttentionVariant::scaled_dot;
  if (text == "dot") return AttentionVariant::dot;
  if (text == "additive") return AttentionVariant::additive;
  if (text == "avg") return AttentionVariant::avg;
  throw ConfigError("unknown attention variant '" + std::string(text) +
                    "' (expected scaled_dot|dot|additive|avg)");
}

void ModelConfig::validate() const {
  if (n == 0) throw ConfigError("n must be positive");
  if (m < 2) throw ConfigError("m must be at least 2");
  if (d_w == 0 || d_e == 0) throw ConfigError("embedding sizes must be positive");
  if (chain_layers == 0) throw ConfigError("chain-layers must be positive");
  if (chain_heads == 0 || d_e % chain_heads != 0) {
    throw ConfigError("d-e must be divisible by chain-heads");
  }
  if (chain_ffn == 0) throw ConfigError("chain-ffn must be positive");
  if (use_text) {
    if (text_heads == 0 || d_e % text_heads != 0) {
      throw ConfigError("d-e must be divisible by text-heads");
    }
    if (text_ffn == 0) throw ConfigError("text-ffn must be positive");
    if (max_text_len < 2) throw ConfigError("max-text-len must be at least 2");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

Chain pad_chain(const Chain& chain, std::size_t n) {
  Chain out;
  out.protagonist = chain.protagonist;
  const std::size_t len = chain.events.size();
  const std::size_t first = len > n ? len - n : 0;
  out.events.assign(chain.events.begin() + static_cast<std::ptrdiff_t>(first), chain.events.end());
  out.events.resize(n, Event::null_event());
  return out;
}

Role protagonist_role(const Event& event, std::string_view entity) {
  static constexpr Role kSlotRoles[3] = {Role::subj, Role::obj, Role::iobj};
  for (std::size_t slot = 0; slot < 3; ++slot) {
    if (event.participants[slot] && *event.participants[slot] == entity) return kSlotRoles[slot];
  }
  return Role::none;
}

std::vector<DerivedChain> derive_chains(const Sample& sample, std::size_t candidate_index,
                                        std::size_t n, bool multi_chain) {
  if (candidate_index >= sample.candidates.size()) {
    throw DataError("candidate index out of range");
  }
  const Event& candidate = sample.candidates[candidate_index];
  std::vector<DerivedChain> out;
  for (std::size_t slot = 0; slot < 3; ++slot) {
    const auto& eid = candidate.participants[slot];
    if (!eid) continue;
    const Chain* raw = sample.find_entity(*eid);
    if (raw == nullptr) throw DataError("participant '" + *eid + "' has no chain");
    DerivedChain derived{static_cast<int>(slot), pad_chain(*raw, n)};
    for (auto& event : derived.chain.events) {
      if (event.is_null()) {
        event.role = Role::none;
      } else if (event.has_participants()) {
        event.role = protagonist_role(event, *eid);
      }
    }
    out.push_back(std::move(derived));
    if (!multi_chain) break;
  }
  if (out.empty()) throw DataError("no protagonist");
  return out;
}

}  // namespace mcpred
