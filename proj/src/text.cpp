#include "mcpred/text.hpp"

#include <algorithm>
#include <sstream>

#include "mcpred/errors.hpp"

namespace mcpred::text {

namespace {

std::string_view role_tag(Role role) {
  switch (role) {
    case Role::subj: return special::kSubjToken;
    case Role::obj: return special::kObjToken;
    case Role::iobj: return special::kIobjToken;
    case Role::none: return {};
  }
  return {};
}

}  // namespace

ConvertedSentence convert_sentence(const SentenceText& sentence, int focus_event, Role role) {
  const int len = static_cast<int>(sentence.tokens.size());
  std::vector<EventSpan> spans = sentence.event_spans;
  std::sort(spans.begin(), spans.end(),
            [](const EventSpan& a, const EventSpan& b) { return a.start < b.start; });
  const EventSpan* focus = nullptr;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].start >= spans[i].end || spans[i].start < 0 || spans[i].end > len) {
      throw DataError("empty, inverted or out-of-bounds span");
    }
    if (i > 0 && spans[i].start < spans[i - 1].end) throw DataError("overlapping event spans");
    if (spans[i].event == focus_event) focus = &spans[i];
  }
  if (focus == nullptr) throw DataError("focus event has no span");

  ConvertedSentence out;
  out.tokens.assign(sentence.tokens.begin(), sentence.tokens.end());
  out.pos.assign(sentence.pos.begin(), sentence.pos.end());
  out.verb_index = sentence.verb_index;

  // Right to left so earlier indices stay valid.
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    if (it->event == focus_event) continue;
    out.tokens.erase(out.tokens.begin() + it->start, out.tokens.begin() + it->end);
    out.pos.erase(out.pos.begin() + it->start, out.pos.begin() + it->end);
    out.tokens.insert(out.tokens.begin() + it->start, std::string(special::kUnkToken));
    out.pos.insert(out.pos.begin() + it->start, Pos::O);
    if (it->end <= out.verb_index) out.verb_index -= (it->end - it->start) - 1;
  }

  const auto tag = role_tag(role);
  if (!tag.empty()) {
    const auto v = static_cast<std::ptrdiff_t>(out.verb_index);
    out.tokens.insert(out.tokens.begin() + v + 1, std::string(tag));
    out.pos.insert(out.pos.begin() + v + 1, Pos::O);
    out.tokens.insert(out.tokens.begin() + v, std::string(tag));
    out.pos.insert(out.pos.begin() + v, Pos::O);
    out.verb_index += 1;
  }
  return out;
}

void MaskSet::validate() const {
  if (verbs && (verb_self || verb_others)) {
    throw ConfigError("V_self/V_others refine verb masking and cannot be combined with V");
  }
}

MaskSet MaskSet::parse(std::string_view csv) {
  MaskSet mask;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    auto item = csv.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item == "V") mask.verbs = true;
    else if (item == "N") mask.nouns = true;
    else if (item == "J") mask.adjectives = true;
    else if (item == "R") mask.adverbs = true;
    else if (item == "V_self") mask.verb_self = true;
    else if (item == "V_others") mask.verb_others = true;
    else if (!item.empty()) throw ConfigError("unknown mask category '" + std::string(item) + "'");
    start = end + 1;
  }
  mask.validate();
  return mask;
}

std::string MaskSet::to_string() const {
  std::vector<std::string> parts;
  if (verbs) parts.emplace_back("V");
  if (nouns) parts.emplace_back("N");
  if (adjectives) parts.emplace_back("J");
  if (adverbs) parts.emplace_back("R");
  if (verb_self) parts.emplace_back("V_self");
  if (verb_others) parts.emplace_back("V_others");
  std::ostringstream out;
  for (std::size_t i = 0; i < parts.size(); ++i) out << (i ? "," : "") << parts[i];
  return out.str();
}

std::vector<std::string> mask_constituents(const std::vector<std::string>& tokens,
                                           const std::vector<Pos>& pos, int focus_verb_index,
                                           const MaskSet& mask) {
  if (tokens.size() != pos.size()) throw DataError("tokens and pos tags are not aligned");
  std::vector<std::string> out = tokens;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (is_reserved_token(out[i])) continue;
    const bool is_focus = static_cast<int>(i) == focus_verb_index;
    bool hide = false;
    switch (pos[i]) {
      case Pos::V:
        hide = mask.verbs || (mask.verb_self && is_focus) || (mask.verb_others && !is_focus);
        break;
      case Pos::N: hide = mask.nouns; break;
      case Pos::J: hide = mask.adjectives; break;
      case Pos::R: hide = mask.adverbs; break;
      case Pos::O: break;
    }
    if (hide) out[i] = std::string(special::kUnkToken);
  }
  return out;
}

EncodedTokens encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                            std::size_t max_len) {
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  EncodedTokens out;
  out.ids.assign(max_len, special::kPad);
  out.valid.assign(max_len, false);
  out.ids[0] = special::kCls;
  out.valid[0] = true;
  const std::size_t take = std::min(tokens.size(), max_len - 1);
  for (std::size_t i = 0; i < take; ++i) {
    out.ids[i + 1] = vocab.id(tokens[i]);
    out.valid[i + 1] = true;
  }
  return out;
}

}  // namespace mcpred::text
