#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mcpred/types.hpp"

namespace mcpred {

using TokenId = std::int32_t;

namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kCls = 1;
inline constexpr TokenId kUnk = 2;
inline constexpr TokenId kSubj = 3;
inline constexpr TokenId kObj = 4;
inline constexpr TokenId kIobj = 5;
inline constexpr TokenId kNull = 6;
inline constexpr TokenId kOov = 7;
inline constexpr TokenId kReservedCount = 8;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kSubjToken = "[subj]";
inline constexpr std::string_view kObjToken = "[obj]";
inline constexpr std::string_view kIobjToken = "[iobj]";
inline constexpr std::string_view kNullToken = "[NULL]";
inline constexpr std::string_view kOovToken = "[OOV]";
}  // namespace special

bool is_reserved_token(std::string_view token);

// Lowercases ordinary tokens; reserved tokens pass through unchanged.
std::string normalize_token(std::string_view token);

class Vocabulary {
 public:
  // Reserved tokens only.
  Vocabulary();

  // Appends a token if absent; returns its id.
  TokenId add(std::string_view token);

  // Unseen tokens map to [OOV]; null tokens map to [NULL].
  TokenId id(std::string_view token) const;
  TokenId id(const Token& token) const { return token ? id(std::string_view(*token)) : special::kNull; }
  TokenId id(const std::string& token) const { return id(std::string_view(token)); }
  TokenId id(const char* token) const { return id(std::string_view(token)); }
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  // "token<TAB>id" per line, reserved tokens first.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Every verb and headword is kept; sentence tokens need at least
// min_count occurrences. Ids after the reserved block are ordered by
// descending frequency, ties lexicographic.
Vocabulary build_vocabulary(const std::vector<Sample>& samples, std::size_t min_count);

}  // namespace mcpred
