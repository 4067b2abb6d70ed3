#include <doctest.h>

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mcpred/corpus.hpp"
#include "mcpred/errors.hpp"
#include "mcpred/random.hpp"
#include "mcpred/synthetic.hpp"
#include "mcpred/text.hpp"
#include "mcpred/vocabulary.hpp"
#include "support.hpp"

using namespace mcpred;
using Json = nlohmann::ordered_json;

namespace {

std::string sample_line() {
  Sample s = testing::two_entity_sample();
  s.entities[0].events[0].sentence = testing::restaurant_sentence();
  s.entities[0].events[1].sentence = testing::restaurant_sentence();
  s.entities[0].events[1].sentence->focus_event = 1;
  s.entities[0].events[1].sentence->verb_index = 5;
  return corpus::serialize_sample(s);
}

std::string parse_error(const std::string& line) {
  try {
    corpus::parse_sample(line, 7);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& text, const std::string& part) { return text.find(part) != std::string::npos; }

// Naive conversion oracle: rebuild the token list segment by segment.
std::vector<std::string> rebuild(const SentenceText& s, int focus, const std::string& tag) {
  std::vector<std::string> out;
  int i = 0;
  while (i < static_cast<int>(s.tokens.size())) {
    const EventSpan* span = nullptr;
    for (const auto& sp : s.event_spans) {
      if (sp.start == i && sp.event != focus) span = &sp;
    }
    if (span) {
      out.push_back("[UNK]");
      i = span->end;
      continue;
    }
    if (i == s.verb_index && !tag.empty()) out.push_back(tag);
    out.push_back(s.tokens[i]);
    if (i == s.verb_index && !tag.empty()) out.push_back(tag);
    ++i;
  }
  return out;
}

std::pair<int, int> goal_cell(const std::string& verb) {
  static const std::regex pattern("goal(\\d+)x(\\d+)");
  std::smatch m;
  REQUIRE(std::regex_match(verb, m, pattern));
  return {std::stoi(m[1]), std::stoi(m[2])};
}

int trailing_number(const std::string& token, const std::string& prefix) {
  REQUIRE(token.rfind(prefix, 0) == 0);
  return std::stoi(token.substr(prefix.size()));
}

const Event& last_real(const Chain& c) { return c.events.back(); }

// Key adjective in the sentence attached to the last event of A.
int key_adjective(const Sample& s) {
  const auto& sent = *last_real(s.entities[0]).sentence;
  for (const auto& t : sent.tokens) {
    if (t.rfind("keyadj", 0) == 0) return trailing_number(t, "keyadj");
  }
  FAIL("no key adjective");
  return -1;
}

}  // namespace

TEST_CASE("parse_corpus accepts a well-formed record") {
  const Sample s = corpus::parse_sample(sample_line(), 1);
  CHECK(s.id == "s1");
  CHECK(s.candidates.size() == 5);
  CHECK(s.answer == 2);
  CHECK(s.entities.size() == 2);
  CHECK(s.entities[0].events[0].sentence->tokens.size() == 11);
}

TEST_CASE("parse errors carry line number and field path") {
  Json j = Json::parse(sample_line());

  SUBCASE("four candidates") {
    j["candidates"].erase(j["candidates"].begin());
    const auto msg = parse_error(j.dump());
    CHECK(contains(msg, "line 7"));
    CHECK(contains(msg, "candidate count != 5"));
  }
  SUBCASE("answer out of range") {
    j["answer"] = 5;
    const auto msg = parse_error(j.dump());
    CHECK(contains(msg, "$.answer"));
    CHECK(contains(msg, "answer out of range"));
  }
  SUBCASE("inverted span") {
    j["entities"][0]["chain"][0]["sentence"]["event_spans"][1]["start"] = 7;
    j["entities"][0]["chain"][0]["sentence"]["event_spans"][1]["end"] = 3;
    const auto msg = parse_error(j.dump());
    CHECK(contains(msg, "$.entities[0].chain[0].sentence"));
    CHECK(contains(msg, "empty or inverted span"));
  }
  SUBCASE("span out of bounds") {
    j["entities"][0]["chain"][0]["sentence"]["event_spans"][1]["end"] = 40;
    CHECK(contains(parse_error(j.dump()), "span out of bounds"));
  }
  SUBCASE("malformed JSON") {
    CHECK(contains(parse_error(R"({"id": "x", )"), "malformed JSON"));
  }
  SUBCASE("bad role") {
    j["entities"][1]["chain"][0]["role"] = "agent";
    CHECK(contains(parse_error(j.dump()), "$.entities[1].chain[0].role"));
  }
  SUBCASE("candidate with a sentence") {
    j["candidates"][0]["sentence"] = j["entities"][0]["chain"][0]["sentence"];
    CHECK(contains(parse_error(j.dump()), "$.candidates[0].sentence"));
  }
  SUBCASE("unresolved participant") {
    j["candidates"][3]["participants"][1] = "Q";
    CHECK(contains(parse_error(j.dump()), "$.candidates[3].participants"));
  }
  SUBCASE("candidate without protagonist") {
    j["candidates"][3]["participants"] = Json::array({nullptr, nullptr, nullptr});
    CHECK(contains(parse_error(j.dump()), "no protagonist"));
  }
  SUBCASE("missing field") {
    j.erase("id");
    CHECK(contains(parse_error(j.dump()), "$.id"));
  }
}

TEST_CASE("parse_corpus reports the failing line") {
  std::istringstream in(sample_line() + "\n\n" + "{}\n");
  try {
    corpus::parse_corpus(in);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(contains(e.what(), "line 3"));
  }
}

TEST_CASE("serialize then parse is the identity") {
  for (auto task : {corpus::SynthTask::multichain, corpus::SynthTask::text, corpus::SynthTask::combined}) {
    corpus::SynthConfig cfg;
    cfg.task = task;
    cfg.n_samples = 50;
    for (const auto& s : corpus::generate_synthetic(cfg, 11)) {
      CHECK(corpus::parse_sample(corpus::serialize_sample(s), 1) == s);
    }
  }
  const Sample s = corpus::parse_sample(sample_line(), 1);
  CHECK(corpus::serialize_sample(s) == sample_line());
}

TEST_CASE("corpus files round trip") {
  testing::TempDir dir("corpus");
  corpus::SynthConfig cfg;
  cfg.task = corpus::SynthTask::combined;
  cfg.n_samples = 20;
  const auto samples = corpus::generate_synthetic(cfg, 2);
  corpus::write_corpus_file(dir.file("c.jsonl"), samples);
  CHECK(corpus::read_corpus_file(dir.file("c.jsonl")) == samples);
  CHECK_THROWS_AS(corpus::read_corpus_file(dir.file("missing.jsonl")), DataError);
}

// ---- vocabulary -----------------------------------------------------------

TEST_CASE("vocabulary reserved ids") {
  const Vocabulary v;
  CHECK(v.size() == 8);
  const char* reserved[] = {"[PAD]", "[CLS]", "[UNK]", "[subj]", "[obj]", "[iobj]", "[NULL]", "[OOV]"};
  for (int i = 0; i < 8; ++i) CHECK(v.id(reserved[i]) == i);
  CHECK(v.id("never-seen") == special::kOov);
  CHECK(v.id(Token()) == special::kNull);
}

TEST_CASE("vocabulary min_count applies to sentence tokens only") {
  Sample s = testing::two_entity_sample();
  SentenceText sent;
  sent.tokens = {"eat", "eat", "eat", "pay", "sometimes"};
  sent.pos = {Pos::V, Pos::V, Pos::V, Pos::V, Pos::R};
  sent.verb_index = 0;
  sent.event_spans = {{0, 0, 1}};
  s.entities[1].events[0].sentence = sent;
  s.candidates[0].verb = "consume";
  const auto vocab = build_vocabulary({s}, 2);
  CHECK(vocab.contains("eat"));
  CHECK_FALSE(vocab.contains("sometimes"));
  // Event words stay at any count; a lone sentence mention does not.
  CHECK(vocab.contains("consume"));
  CHECK_FALSE(vocab.contains("pay"));
  for (const auto& c : s.candidates) CHECK(vocab.contains(*c.verb));
}

TEST_CASE("vocabulary order is frequency then lexicographic") {
  Sample s = testing::two_entity_sample();
  const auto vocab = build_vocabulary({s}, 1);
  std::map<std::string, int> freq;
  auto count = [&](const Event& e) {
    for (const Token* t : {&e.verb, &e.a0, &e.a1, &e.a2}) {
      if (*t) ++freq[**t];
    }
  };
  for (const auto& c : s.entities) {
    for (const auto& e : c.events) count(e);
  }
  for (const auto& c : s.candidates) count(c);
  std::vector<std::pair<std::string, int>> expected(freq.begin(), freq.end());
  std::stable_sort(expected.begin(), expected.end(), [](auto& a, auto& b) { return a.second > b.second; });
  REQUIRE(vocab.size() == 8 + expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(vocab.token(static_cast<TokenId>(8 + i)) == expected[i].first);
}

TEST_CASE("vocabulary is deterministic, keeps all event words and round trips") {
  corpus::SynthConfig cfg;
  cfg.task = corpus::SynthTask::combined;
  cfg.n_samples = 100;
  const auto samples = corpus::generate_synthetic(cfg, 5);
  const auto a = build_vocabulary(samples, 3);
  const auto b = build_vocabulary(corpus::generate_synthetic(cfg, 5), 3);
  CHECK(a == b);
  for (const auto& s : samples) {
    for (const auto& c : s.entities) {
      for (const auto& e : c.events) CHECK(a.contains(*e.verb));
    }
    for (const auto& c : s.candidates) CHECK(a.contains(*c.verb));
  }
  std::stringstream io;
  a.save(io);
  CHECK(Vocabulary::load(io) == a);
}

TEST_CASE("vocabulary errors") {
  CHECK_THROWS_AS(build_vocabulary({}, 1), DataError);
  CHECK_THROWS_AS(build_vocabulary({testing::two_entity_sample()}, 0), ConfigError);
  std::istringstream bad("[CLS]\t0\n");
  CHECK_THROWS_AS(Vocabulary::load(bad), DataError);
}

TEST_CASE("tokens are lowercased") {
  Sample s = testing::two_entity_sample();
  s.candidates[0].verb = "Pay";
  const auto vocab = build_vocabulary({s}, 1);
  CHECK(vocab.contains("pay"));
  CHECK(vocab.id("PAY") == vocab.id("pay"));
}

// ---- sentence conversion --------------------------------------------------

TEST_CASE("sentence conversion of the restaurant example") {
  const auto out = text::convert_sentence(testing::restaurant_sentence(), 0, Role::subj);
  const std::vector<std::string> expected = {"He", "[subj]", "entered", "[subj]", "the", "restaurant", "and", "[UNK]"};
  CHECK(out.tokens == expected);
  CHECK(out.verb_index == 2);
  CHECK(out.pos.size() == out.tokens.size());
}

TEST_CASE("sentence conversion without other events and role none is a no-op") {
  SentenceText s = testing::restaurant_sentence();
  s.event_spans.pop_back();
  const auto out = text::convert_sentence(s, 0, Role::none);
  CHECK(out.tokens == s.tokens);
  CHECK(out.verb_index == s.verb_index);
}

TEST_CASE("sentence conversion matches a segment rebuild") {
  SentenceText s;
  s.tokens = {"she", "woke", "up", "then", "she", "ate", "toast", "and", "left", "home", "quickly"};
  s.pos = {Pos::N, Pos::V, Pos::R, Pos::R, Pos::N, Pos::V, Pos::N, Pos::O, Pos::V, Pos::N, Pos::R};
  s.event_spans = {{2, 8, 10}, {0, 1, 3}, {1, 5, 7}};
  for (int focus = 0; focus < 3; ++focus) {
    s.focus_event = focus;
    for (const auto& sp : s.event_spans) {
      if (sp.event == focus) s.verb_index = sp.start;
    }
    for (Role role : {Role::subj, Role::obj, Role::iobj, Role::none}) {
      const std::string tag = role == Role::none ? "" : "[" + std::string(to_string(role)) + "]";
      const auto out = text::convert_sentence(s, focus, role);
      CHECK(out.tokens == rebuild(s, focus, tag));
      CHECK(std::count(out.tokens.begin(), out.tokens.end(), "[UNK]") == 2);
      CHECK(out.tokens[static_cast<std::size_t>(out.verb_index)] == s.tokens[static_cast<std::size_t>(s.verb_index)]);
    }
  }
}

TEST_CASE("sentence conversion rejects overlapping spans") {
  SentenceText s = testing::restaurant_sentence();
  s.event_spans[1].start = 2;
  CHECK_THROWS_WITH_AS(text::convert_sentence(s, 0, Role::subj), "overlapping event spans", DataError);
}

TEST_CASE("conversion keeps every token outside replaced spans") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    SentenceText s;
    const int len = 6 + static_cast<int>(rng.below(10));
    for (int i = 0; i < len; ++i) {
      s.tokens.push_back("w" + std::to_string(i));
      s.pos.push_back(static_cast<Pos>(rng.below(5)));
    }
    int cursor = 0, event = 0;
    while (cursor < len - 1) {
      const int start = cursor + static_cast<int>(rng.below(2));
      const int end = std::min(len, start + 1 + static_cast<int>(rng.below(3)));
      if (start >= end) break;
      s.event_spans.push_back({event++, start, end});
      cursor = end;
    }
    if (s.event_spans.empty()) continue;
    const auto& focus = s.event_spans[rng.below(s.event_spans.size())];
    s.focus_event = focus.event;
    s.verb_index = focus.start;
    const auto out = text::convert_sentence(s, focus.event, Role::obj);
    int removed = 0;
    for (const auto& sp : s.event_spans) {
      if (sp.event != focus.event) removed += sp.end - sp.start;
    }
    const auto kept = std::count_if(out.tokens.begin(), out.tokens.end(), [](const std::string& t) {
      return t.front() == 'w';
    });
    CHECK(kept == len - removed);
    CHECK(out.tokens[static_cast<std::size_t>(out.verb_index)] == s.tokens[static_cast<std::size_t>(s.verb_index)]);
  }
}

// ---- masking --------------------------------------------------------------

TEST_CASE("constituent masking") {
  const auto s = testing::restaurant_sentence();
  SUBCASE("verbs") {
    const auto out = text::mask_constituents(s.tokens, s.pos, 1, text::MaskSet::parse("V"));
    CHECK(out[1] == "[UNK]");
    CHECK(out[5] == "[UNK]");
    CHECK(out[3] == "restaurant");
  }
  SUBCASE("empty set") { CHECK(text::mask_constituents(s.tokens, s.pos, 1, {}) == s.tokens); }
  SUBCASE("other verbs") {
    const auto out = text::mask_constituents(s.tokens, s.pos, 1, text::MaskSet::parse("V_others"));
    CHECK(out[1] == "entered");
    CHECK(out[5] == "[UNK]");
  }
  SUBCASE("focus verb") {
    const auto out = text::mask_constituents(s.tokens, s.pos, 1, text::MaskSet::parse("V_self"));
    CHECK(out[1] == "[UNK]");
    CHECK(out[5] == "asked");
  }
  SUBCASE("nouns and adjectives") {
    const auto out = text::mask_constituents(s.tokens, s.pos, 1, text::MaskSet::parse("N,J"));
    CHECK(out[0] == "[UNK]");
    CHECK(out[3] == "[UNK]");
    CHECK(out[2] == "the");
  }
}

TEST_CASE("masking never hides special tokens and is idempotent") {
  const auto conv = text::convert_sentence(testing::restaurant_sentence(), 0, Role::subj);
  std::vector<Pos> all_verbs(conv.pos.size(), Pos::V);
  const auto out = text::mask_constituents(conv.tokens, all_verbs, conv.verb_index, text::MaskSet::parse("V"));
  CHECK(out[1] == "[subj]");
  CHECK(out[3] == "[subj]");
  for (const auto& [label, mask] : std::vector<std::pair<std::string, std::string>>{
           {"a", ""}, {"b", "V"}, {"c", "N,J"}, {"d", "V_self,R"}, {"e", "V_others"}}) {
    const auto m = text::MaskSet::parse(mask);
    const auto once = text::mask_constituents(conv.tokens, conv.pos, conv.verb_index, m);
    CHECK(text::mask_constituents(once, conv.pos, conv.verb_index, m) == once);
  }
}

TEST_CASE("mask set parsing") {
  CHECK(text::MaskSet::parse("").empty());
  CHECK(text::MaskSet::parse("V,N").to_string() == "V,N");
  CHECK_THROWS_AS(text::MaskSet::parse("V,V_self"), ConfigError);
  CHECK_THROWS_AS(text::MaskSet::parse("X"), ConfigError);
}

// ---- encoding -------------------------------------------------------------

TEST_CASE("encode_tokens pads, truncates and maps unknown tokens") {
  Vocabulary vocab;
  std::vector<std::string> words;
  for (int i = 0; i < 20; ++i) words.push_back("t" + std::to_string(i));
  for (const auto& w : words) vocab.add(w);

  const auto short_enc = text::encode_tokens({"t0", "t1", "t2"}, vocab, 8);
  REQUIRE(short_enc.ids.size() == 8);
  CHECK(short_enc.ids[0] == special::kCls);
  for (int i = 4; i < 8; ++i) {
    CHECK(short_enc.ids[static_cast<std::size_t>(i)] == special::kPad);
    CHECK_FALSE(short_enc.valid[static_cast<std::size_t>(i)]);
  }
  const auto long_enc = text::encode_tokens(words, vocab, 8);
  for (std::size_t i = 1; i < 8; ++i) CHECK(long_enc.ids[i] == vocab.id(words[i - 1]));
  CHECK(text::encode_tokens({"zzz"}, vocab, 4).ids[1] == special::kOov);
}

// ---- synthetic generator --------------------------------------------------

TEST_CASE("synthetic generation is deterministic and schema-valid") {
  for (auto task : {corpus::SynthTask::multichain, corpus::SynthTask::text, corpus::SynthTask::combined}) {
    corpus::SynthConfig cfg;
    cfg.task = task;
    cfg.n_samples = 200;
    std::ostringstream a, b;
    corpus::write_corpus(a, corpus::generate_synthetic(cfg, 7));
    corpus::write_corpus(b, corpus::generate_synthetic(cfg, 7));
    CHECK(a.str() == b.str());
    std::istringstream in(a.str());
    CHECK(corpus::parse_corpus(in).size() == 200);
    std::ostringstream c;
    corpus::write_corpus(c, corpus::generate_synthetic(cfg, 8));
    CHECK(c.str() != a.str());
  }
}

TEST_CASE("synthetic config validation") {
  corpus::SynthConfig cfg;
  cfg.key_verbs = 2;
  CHECK_THROWS_AS(corpus::generate_synthetic(cfg, 1), ConfigError);
  cfg = {};
  cfg.min_length = 9;
  CHECK_THROWS_AS(corpus::generate_synthetic(cfg, 1), ConfigError);
  CHECK_THROWS_AS(corpus::parse_synth_task("both"), ConfigError);
}

TEST_CASE("multichain oracles") {
  corpus::SynthConfig cfg;
  cfg.n_samples = 2000;
  const auto samples = corpus::generate_synthetic(cfg, 7);
  std::size_t both = 0, single = 0;
  std::array<std::size_t, 5> answer_positions{};
  for (const auto& s : samples) {
    const int i = trailing_number(*last_real(s.entities[0]).verb, "keya");
    const int j = trailing_number(*last_real(s.entities[1]).verb, "keyb");
    ++answer_positions[static_cast<std::size_t>(s.answer)];
    // g-lookup oracle reading both chains.
    int pick = -1;
    for (std::size_t c = 0; c < s.candidates.size(); ++c) {
      if (goal_cell(*s.candidates[c].verb) == std::make_pair(i, j)) pick = static_cast<int>(c);
    }
    both += pick == s.answer;
    // Bayes-optimal classifier seeing only A's chain: the posterior is
    // uniform over candidates in row i, so any fixed choice among them is optimal.
    std::vector<int> row;
    for (std::size_t c = 0; c < s.candidates.size(); ++c) {
      if (goal_cell(*s.candidates[c].verb).first == i) row.push_back(static_cast<int>(c));
    }
    CHECK(row.size() == 2);
    single += row.front() == s.answer;
  }
  CHECK(both == samples.size());
  const double single_acc = static_cast<double>(single) / static_cast<double>(samples.size());
  CHECK(single_acc == doctest::Approx(0.5).epsilon(0.06));
  for (auto count : answer_positions) CHECK(count == doctest::Approx(400).epsilon(0.2));
}

TEST_CASE("text task oracles") {
  corpus::SynthConfig cfg;
  cfg.task = corpus::SynthTask::text;
  cfg.n_samples = 2000;
  const auto samples = corpus::generate_synthetic(cfg, 9);
  std::size_t with_text = 0, event_only = 0;
  for (const auto& s : samples) {
    REQUIRE(s.entities.size() == 1);
    const int i = trailing_number(*last_real(s.entities[0]).verb, "keya");
    const int adj = key_adjective(s);
    std::vector<int> row;
    for (std::size_t c = 0; c < s.candidates.size(); ++c) {
      const auto cell = goal_cell(*s.candidates[c].verb);
      if (cell == std::make_pair(i, adj)) with_text += static_cast<int>(c) == s.answer;
      if (cell.first == i) row.push_back(static_cast<int>(c));
    }
    CHECK(row.size() == 2);
    event_only += row.front() == s.answer;
    // The key adjective appears in no other sentence of the chain.
    for (std::size_t e = 0; e + 1 < s.entities[0].events.size(); ++e) {
      const auto& sent = *s.entities[0].events[e].sentence;
      const bool shares_last = std::any_of(sent.event_spans.begin(), sent.event_spans.end(), [&](const EventSpan& sp) {
        return sp.event == static_cast<int>(s.entities[0].events.size() - 1);
      });
      if (shares_last) continue;
      for (const auto& t : sent.tokens) CHECK(t.rfind("keyadj", 0) != 0);
    }
  }
  CHECK(with_text == samples.size());
  CHECK(static_cast<double>(event_only) / static_cast<double>(samples.size()) == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("combined task needs both chains and the sentence") {
  corpus::SynthConfig cfg;
  cfg.task = corpus::SynthTask::combined;
  cfg.n_samples = 1000;
  std::size_t full = 0;
  for (const auto& s : corpus::generate_synthetic(cfg, 4)) {
    const int i = trailing_number(*last_real(s.entities[0]).verb, "keya");
    const int j = trailing_number(*last_real(s.entities[1]).verb, "keyb");
    const int r = 2 * i + key_adjective(s);
    for (std::size_t c = 0; c < s.candidates.size(); ++c) {
      if (goal_cell(*s.candidates[c].verb) == std::make_pair(r, j)) full += static_cast<int>(c) == s.answer;
    }
  }
  CHECK(full == 1000);
}
