#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcpred/types.hpp"

namespace testing {

using mcpred::Event;
using mcpred::Pos;
using mcpred::SentenceText;
using mcpred::Token;

inline Event event(Token verb, Token a0 = std::nullopt, Token a1 = std::nullopt, Token a2 = std::nullopt) {
  Event e;
  e.verb = std::move(verb);
  e.a0 = std::move(a0);
  e.a1 = std::move(a1);
  e.a2 = std::move(a2);
  return e;
}

inline Event candidate(std::string verb, std::optional<std::string> p0, std::optional<std::string> p1 = std::nullopt,
                       std::optional<std::string> p2 = std::nullopt) {
  Event e = event(verb, p0 ? Token("x") : Token(), p1 ? Token("y") : Token(), p2 ? Token("z") : Token());
  e.participants = {p0, p1, p2};
  return e;
}

// "He entered the restaurant and asked the waiter for the menu", with the
// second clause mentioning another event of the same chain.
inline SentenceText restaurant_sentence() {
  SentenceText s;
  s.tokens = {"He", "entered", "the", "restaurant", "and", "asked", "the", "waiter", "for", "the", "menu"};
  s.pos = {Pos::N, Pos::V, Pos::O, Pos::N, Pos::O, Pos::V, Pos::O, Pos::N, Pos::O, Pos::O, Pos::N};
  s.verb_index = 1;
  s.event_spans = {{0, 1, 4}, {1, 5, 11}};
  s.focus_event = 0;
  return s;
}

// Two entities, five candidates over (A, B, null), answer 2.
inline mcpred::Sample two_entity_sample() {
  mcpred::Sample s;
  s.id = "s1";
  mcpred::Chain a{"A", {event("enter", "he", "restaurant"), event("order", "he", "food"), event("eat", "he", "food")}};
  for (auto& e : a.events) e.role = mcpred::Role::subj;
  mcpred::Chain b{"B", {event("serve", "waiter", "food")}};
  b.events[0].role = mcpred::Role::subj;
  s.entities = {a, b};
  const char* verbs[] = {"pay", "leave", "tip", "sleep", "drive"};
  for (const char* v : verbs) {
    Event c = event(v, "he", "waiter");
    c.participants = {std::string("A"), std::string("B"), std::nullopt};
    s.candidates.push_back(c);
  }
  s.answer = 2;
  return s;
}

// Fresh directory under the system temp path, removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("mcpred-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
