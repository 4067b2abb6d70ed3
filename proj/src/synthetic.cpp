#include "mcpred/synthetic.hpp"

#include <array>
#include <string>

#include <fmt/format.h>

#include "mcpred/errors.hpp"
#include "mcpred/random.hpp"

namespace mcpred::corpus {

std::string_view to_string(SynthTask task) {
  switch (task) {
    case SynthTask::multichain: return "multichain";
    case SynthTask::text: return "text";
    case SynthTask::combined: return "combined";
  }
  return "?";
}

SynthTask parse_synth_task(std::string_view text) {
  if (text == "multichain") return SynthTask::multichain;
  if (text == "text") return SynthTask::text;
  if (text == "combined") return SynthTask::combined;
  throw ConfigError(fmt::format("unknown task '{}'", text));
}

void SynthConfig::validate() const {
  if (n_samples == 0) throw ConfigError("n_samples must be positive");
  if (min_length < 1 || min_length > chain_length) throw ConfigError("need 1 <= min_length <= chain_length");
  if (key_verbs < 3) throw ConfigError("key_verbs must be at least 3");
  if (filler_verbs < 1 || adjectives < 1) throw ConfigError("filler_verbs and adjectives must be positive");
  if (nouns < 3) throw ConfigError("nouns must be at least 3");
  if (!(shared_sentence_rate >= 0.0 && shared_sentence_rate <= 1.0)) {
    throw ConfigError("shared_sentence_rate must lie in [0, 1]");
  }
}

namespace {

struct Clause {
  std::string verb;
  std::string object;
  std::string adjective;
};

class Builder {
 public:
  Builder(const SynthConfig& config, Rng& rng) : config_(config), rng_(rng) {}

  std::string noun() { return fmt::format("noun{}", rng_.below(config_.nouns)); }
  std::string filler_verb() { return fmt::format("act{}", rng_.below(config_.filler_verbs)); }
  std::string filler_adjective() { return fmt::format("adj{}", rng_.below(config_.adjectives)); }

  // Chain whose last event has verb `key_verb`; `key_adjective` (if any)
  // goes into that event's sentence.
  Chain chain(const EntityId& eid, const std::string& head, const std::string& key_verb,
              const std::string& key_adjective, bool with_text) {
    const std::size_t span = config_.chain_length - config_.min_length + 1;
    const std::size_t length = config_.min_length + rng_.below(span);
    std::vector<Clause> clauses(length);
    for (std::size_t k = 0; k < length; ++k) {
      const bool last = k + 1 == length;
      clauses[k].verb = last ? key_verb : filler_verb();
      clauses[k].object = noun();
      clauses[k].adjective = last && !key_adjective.empty() ? key_adjective : filler_adjective();
    }

    Chain chain;
    chain.protagonist = eid;
    for (const auto& c : clauses) {
      Event e;
      e.verb = c.verb;
      e.a0 = head;
      e.a1 = c.object;
      e.role = Role::subj;
      e.participants = {eid, std::nullopt, std::nullopt};
      chain.events.push_back(std::move(e));
    }
    if (!with_text) return chain;

    for (std::size_t k = 0; k < length;) {
      // Two consecutive non-final events may share one sentence.
      const bool pair = k + 2 < length && rng_.uniform() < config_.shared_sentence_rate;
      SentenceText s;
      s.tokens.push_back(head);
      s.pos.push_back(Pos::N);
      const std::size_t count = pair ? 2 : 1;
      for (std::size_t j = 0; j < count; ++j) {
        if (j > 0) {
          s.tokens.push_back("and");
          s.pos.push_back(Pos::O);
        }
        const auto& c = clauses[k + j];
        const int start = static_cast<int>(s.tokens.size());
        const std::array<std::pair<std::string, Pos>, 4> words = {
            {{c.verb, Pos::V}, {"the", Pos::O}, {c.adjective, Pos::J}, {c.object, Pos::N}}};
        for (const auto& [w, p] : words) {
          s.tokens.push_back(w);
          s.pos.push_back(p);
        }
        s.event_spans.push_back(
            EventSpan{static_cast<int>(k + j), start, static_cast<int>(s.tokens.size())});
      }
      s.tokens.push_back(".");
      s.pos.push_back(Pos::O);
      for (std::size_t j = 0; j < count; ++j) {
        SentenceText own = s;
        own.focus_event = static_cast<int>(k + j);
        own.verb_index = own.event_spans[j].start;
        chain.events[k + j].sentence = std::move(own);
      }
      k += count;
    }
    return chain;
  }

  // Index in [0, bound) different from every value in `avoid`; falls back
  // to a plain draw when nothing is left.
  std::size_t other(std::size_t bound, std::initializer_list<std::size_t> avoid) {
    std::vector<std::size_t> pool;
    for (std::size_t v = 0; v < bound; ++v) {
      bool skip = false;
      for (std::size_t a : avoid) skip = skip || a == v;
      if (!skip) pool.push_back(v);
    }
    if (pool.empty()) return rng_.below(bound);
    return pool[rng_.below(pool.size())];
  }

 private:
  const SynthConfig& config_;
  Rng& rng_;
};

}  // namespace

std::vector<Sample> generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, "synthetic"));
  Builder build(config, rng);
  const bool has_b = config.task != SynthTask::text;
  const bool with_text = config.task != SynthTask::multichain;
  const std::size_t k = config.key_verbs;
  const std::size_t rows = config.task == SynthTask::combined ? 2 * k : k;
  const std::size_t cols = config.task == SynthTask::text ? 2 : k;

  std::vector<Sample> out;
  out.reserve(config.n_samples);
  for (std::size_t index = 0; index < config.n_samples; ++index) {
    Sample sample;
    sample.id = fmt::format("{}-{}", to_string(config.task), index);

    const std::size_t head_a = rng.below(config.nouns);
    const std::size_t head_b = build.other(config.nouns, {head_a});
    const std::string name_a = fmt::format("noun{}", head_a);
    const std::string name_b = fmt::format("noun{}", head_b);

    const std::size_t verb_a = rng.below(k);
    const std::size_t verb_b = rng.below(k);
    const std::size_t adj = rng.below(2);
    const std::string key_adj = with_text ? fmt::format("keyadj{}", adj) : std::string();

    std::size_t r = verb_a;
    std::size_t c = verb_b;
    if (config.task == SynthTask::text) c = adj;
    if (config.task == SynthTask::combined) r = 2 * verb_a + adj;

    sample.entities.push_back(build.chain("A", name_a, fmt::format("keya{}", verb_a), key_adj, with_text));
    if (has_b) {
      sample.entities.push_back(build.chain("B", name_b, fmt::format("keyb{}", verb_b), "", with_text));
    }

    const std::size_t r1 = build.other(rows, {r});
    const std::size_t c1 = build.other(cols, {c});
    const std::size_t r2 = build.other(rows, {r, r1});
    const std::size_t c2 = build.other(cols, {c, c1});
    const std::array<std::pair<std::size_t, std::size_t>, kCandidateCount> cells = {
        {{r, c}, {r, c1}, {r1, c}, {r1, c1}, {r2, c2}}};

    std::array<std::size_t, kCandidateCount> order = {0, 1, 2, 3, 4};
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t slot = 0; slot < kCandidateCount; ++slot) {
      const auto [row, col] = cells[order[slot]];
      Event cand;
      cand.verb = fmt::format("goal{}x{}", row, col);
      cand.a0 = name_a;
      cand.participants[0] = "A";
      if (has_b) {
        cand.a1 = name_b;
        cand.participants[1] = "B";
      } else {
        cand.a1 = build.noun();
      }
      if (order[slot] == 0) sample.answer = static_cast<int>(slot);
      sample.candidates.push_back(std::move(cand));
    }
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace mcpred::corpus
