#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mcpred/types.hpp"
#include "mcpred/vocabulary.hpp"

namespace mcpred::text {

// Converted sentence with POS tags kept aligned to the token list.
// Inserted tokens ([UNK], role tags) are tagged O.
struct ConvertedSentence {
  std::vector<std::string> tokens;
  std::vector<Pos> pos;
  int verb_index = 0;  // focus verb position after conversion
};

// Replaces each non-focus event span with one [UNK] and wraps the focus
// verb in role tags (none adds no tags). Throws DataError on overlapping
// spans or a missing focus span.
ConvertedSentence convert_sentence(const SentenceText& sentence, int focus_event, Role role);

struct MaskSet {
  bool verbs = false;
  bool nouns = false;
  bool adjectives = false;
  bool adverbs = false;
  bool verb_self = false;    // focus verb only
  bool verb_others = false;  // every verb except the focus verb

  bool empty() const { return !(verbs || nouns || adjectives || adverbs || verb_self || verb_others); }
  // Throws ConfigError when V_self/V_others are combined with V.
  void validate() const;
  // Comma separated subset of V,N,J,R,V_self,V_others; empty string is the empty set.
  static MaskSet parse(std::string_view csv);
  std::string to_string() const;

  bool operator==(const MaskSet&) const = default;
};

// Replaces masked constituents with [UNK]. Special tokens are never masked.
std::vector<std::string> mask_constituents(const std::vector<std::string>& tokens,
                                           const std::vector<Pos>& pos, int focus_verb_index,
                                           const MaskSet& mask);

struct EncodedTokens {
  std::vector<TokenId> ids;
  std::vector<bool> valid;
};

// [CLS] + ids, truncated to max_len, [PAD]-padded to max_len.
EncodedTokens encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                            std::size_t max_len);

}  // namespace mcpred::text
