#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "mcpred/types.hpp"

namespace mcpred::corpus {

enum class SynthTask { multichain, text, combined };

std::string_view to_string(SynthTask task);
SynthTask parse_synth_task(std::string_view text);  // throws ConfigError

// Token naming used by the generator:
//   key verbs of protagonist A "keya<i>", of protagonist B "keyb<j>",
//   key adjectives "keyadj<c>", gold/distractor verbs "goal<r>x<c>".
// The answer is goal<r>x<c> with
//   multichain: r = i (last verb of A), c = j (last verb of B)
//   text:       r = i, c = adjective in the sentence of A's last event
//   combined:   r = 2 * i + adjective, c = j
// Distractors are goal<r>x<c'>, goal<r'>x<c>, goal<r'>x<c'> and goal<r''>x<c''>
// with r' != r, c' != c, r'' outside {r, r'}, so a model that sees only
// the row key (or only the column key) is left with two equally likely
// candidates.
struct SynthConfig {
  SynthTask task = SynthTask::multichain;
  std::size_t n_samples = 2000;
  std::size_t chain_length = 8;  // longest chain
  std::size_t min_length = 4;    // shortest chain
  std::size_t key_verbs = 4;     // per protagonist; at least 3
  std::size_t filler_verbs = 20;
  std::size_t nouns = 30;
  std::size_t adjectives = 10;   // filler adjectives, disjoint from the key ones
  double shared_sentence_rate = 0.3;

  void validate() const;  // throws ConfigError
};

std::vector<Sample> generate_synthetic(const SynthConfig& config, std::uint64_t seed);

}  // namespace mcpred::corpus
