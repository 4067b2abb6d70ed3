#include "mcpred/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "mcpred/errors.hpp"

namespace mcpred {

namespace {

constexpr std::string_view kReserved[] = {
    special::kPadToken,  special::kClsToken, special::kUnkToken,  special::kSubjToken,
    special::kObjToken,  special::kIobjToken, special::kNullToken, special::kOovToken,
};

}  // namespace

bool is_reserved_token(std::string_view token) {
  return std::find(std::begin(kReserved), std::end(kReserved), token) != std::end(kReserved);
}

std::string normalize_token(std::string_view token) {
  std::string out(token);
  if (is_reserved_token(token)) return out;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Vocabulary::Vocabulary() {
  for (auto tok : kReserved) add(tok);
}

TokenId Vocabulary::add(std::string_view token) {
  std::string key(token);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(normalize_token(token));
  return it == ids_.end() ? special::kOov : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.count(normalize_token(token)) != 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw DataError("vocabulary line " + std::to_string(line_no) + ": missing tab");
    }
    const std::string token = line.substr(0, tab);
    long long id = -1;
    try {
      id = std::stoll(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError("vocabulary line " + std::to_string(line_no) + ": bad id");
    }
    if (line_no <= static_cast<std::size_t>(special::kReservedCount)) {
      if (token != kReserved[line_no - 1] || id != static_cast<long long>(line_no - 1)) {
        throw DataError("vocabulary line " + std::to_string(line_no) +
                        ": reserved tokens must come first in fixed order");
      }
      continue;
    }
    if (id != static_cast<long long>(vocab.size()) || vocab.contains(token)) {
      throw DataError("vocabulary line " + std::to_string(line_no) + ": ids must be dense and unique");
    }
    vocab.add(token);
  }
  return vocab;
}

Vocabulary build_vocabulary(const std::vector<Sample>& samples, std::size_t min_count) {
  if (samples.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  if (min_count == 0) throw ConfigError("min-count must be at least 1");

  std::map<std::string, std::size_t> counts;
  std::set<std::string> event_words;
  auto count_event = [&](const Event& e) {
    for (const Token* t : {&e.verb, &e.a0, &e.a1, &e.a2}) {
      if (!*t) continue;
      auto w = normalize_token(**t);
      ++counts[w];
      event_words.insert(std::move(w));
    }
    if (e.sentence) {
      for (const auto& tok : e.sentence->tokens) ++counts[normalize_token(tok)];
    }
  };
  for (const auto& s : samples) {
    for (const auto& chain : s.entities) {
      for (const auto& e : chain.events) count_event(e);
    }
    for (const auto& c : s.candidates) count_event(c);
  }

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [word, count] : counts) {
    if (is_reserved_token(word)) continue;
    if (count >= min_count || event_words.count(word) != 0) kept.emplace_back(word, count);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  for (const auto& [word, count] : kept) vocab.add(word);
  return vocab;
}

}  // namespace mcpred
