#include "mcpred/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "mcpred/errors.hpp"

namespace mcpred::corpus {

namespace {

using Json = nlohmann::ordered_json;

class RecordParser {
 public:
  explicit RecordParser(std::size_t line_no) : line_no_(line_no) {}

  [[noreturn]] void fail(const std::string& path, const std::string& reason) const {
    throw DataError("line " + std::to_string(line_no_) + ": " + path + ": " + reason);
  }

  const Json& field(const Json& obj, const char* key, const std::string& path) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + "." + key, "missing field");
    return *it;
  }

  std::string string_field(const Json& obj, const char* key, const std::string& path) const {
    const Json& v = field(obj, key, path);
    if (!v.is_string()) fail(path + "." + key, "expected string");
    return v.get<std::string>();
  }

  Token nullable_string(const Json& obj, const char* key, const std::string& path) const {
    const Json& v = field(obj, key, path);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) fail(path + "." + key, "expected string or null");
    return v.get<std::string>();
  }

  int int_field(const Json& obj, const char* key, const std::string& path) const {
    const Json& v = field(obj, key, path);
    if (!v.is_number_integer()) fail(path + "." + key, "expected integer");
    return v.get<int>();
  }

  const Json& array_field(const Json& obj, const char* key, const std::string& path) const {
    const Json& v = field(obj, key, path);
    if (!v.is_array()) fail(path + "." + key, "expected array");
    return v;
  }

  std::array<std::optional<EntityId>, 3> participants(const Json& v, const std::string& path) const {
    if (!v.is_array() || v.size() != 3) fail(path, "expected array of 3 entity ids or nulls");
    std::array<std::optional<EntityId>, 3> out;
    for (std::size_t j = 0; j < 3; ++j) {
      if (v[j].is_null()) continue;
      if (!v[j].is_string()) fail(path + "[" + std::to_string(j) + "]", "expected string or null");
      out[j] = v[j].get<std::string>();
    }
    return out;
  }

  SentenceText sentence(const Json& v, const std::string& path) const {
    if (!v.is_object()) fail(path, "expected object or null");
    SentenceText s;
    for (const auto& tok : array_field(v, "tokens", path)) {
      if (!tok.is_string()) fail(path + ".tokens", "expected strings");
      s.tokens.push_back(tok.get<std::string>());
    }
    for (const auto& tag : array_field(v, "pos", path)) {
      if (!tag.is_string()) fail(path + ".pos", "expected strings");
      try {
        s.pos.push_back(parse_pos(tag.get<std::string>()));
      } catch (const DataError& e) {
        fail(path + ".pos", e.what());
      }
    }
    s.verb_index = int_field(v, "verb_index", path);
    const Json& spans = array_field(v, "event_spans", path);
    for (std::size_t k = 0; k < spans.size(); ++k) {
      const std::string sp = path + ".event_spans[" + std::to_string(k) + "]";
      if (!spans[k].is_object()) fail(sp, "expected object");
      s.event_spans.push_back(
          {int_field(spans[k], "event", sp), int_field(spans[k], "start", sp), int_field(spans[k], "end", sp)});
    }
    s.focus_event = int_field(v, "focus_event", path);
    try {
      s.validate();
    } catch (const DataError& e) {
      fail(path, e.what());
    }
    return s;
  }

  Event chain_event(const Json& v, const std::string& path) const {
    if (!v.is_object()) fail(path, "expected object");
    Event e;
    e.verb = nullable_string(v, "verb", path);
    e.a0 = nullable_string(v, "a0", path);
    e.a1 = nullable_string(v, "a1", path);
    e.a2 = nullable_string(v, "a2", path);
    try {
      e.role = parse_role(string_field(v, "role", path));
    } catch (const DataError& err) {
      fail(path + ".role", err.what());
    }
    const Json& sent = field(v, "sentence", path);
    if (!sent.is_null()) e.sentence = sentence(sent, path + ".sentence");
    if (auto it = v.find("participants"); it != v.end()) {
      e.participants = participants(*it, path + ".participants");
    }
    return e;
  }

  Event candidate(const Json& v, const std::string& path) const {
    if (!v.is_object()) fail(path, "expected object");
    Event e;
    const Json& verb = field(v, "verb", path);
    if (!verb.is_string()) fail(path + ".verb", "expected string");
    e.verb = verb.get<std::string>();
    e.a0 = nullable_string(v, "a0", path);
    e.a1 = nullable_string(v, "a1", path);
    e.a2 = nullable_string(v, "a2", path);
    if (auto it = v.find("sentence"); it != v.end() && !it->is_null()) {
      fail(path + ".sentence", "candidate events carry no sentence");
    }
    e.participants = participants(field(v, "participants", path), path + ".participants");
    return e;
  }

  Sample sample(const Json& root) const {
    if (!root.is_object()) fail("$", "expected object");
    Sample s;
    s.id = string_field(root, "id", "$");

    const Json& entities = array_field(root, "entities", "$");
    std::set<std::string> seen;
    for (std::size_t k = 0; k < entities.size(); ++k) {
      const std::string path = "$.entities[" + std::to_string(k) + "]";
      if (!entities[k].is_object()) fail(path, "expected object");
      Chain chain;
      chain.protagonist = string_field(entities[k], "eid", path);
      if (!seen.insert(chain.protagonist).second) fail(path + ".eid", "duplicate entity id");
      const Json& events = array_field(entities[k], "chain", path);
      for (std::size_t i = 0; i < events.size(); ++i) {
        chain.events.push_back(chain_event(events[i], path + ".chain[" + std::to_string(i) + "]"));
      }
      s.entities.push_back(std::move(chain));
    }

    const Json& candidates = array_field(root, "candidates", "$");
    if (candidates.size() != kCandidateCount) {
      fail("$.candidates", "candidate count != " + std::to_string(kCandidateCount));
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const std::string path = "$.candidates[" + std::to_string(i) + "]";
      Event c = candidate(candidates[i], path);
      bool any = false;
      for (std::size_t j = 0; j < 3; ++j) {
        if (!c.participants[j]) continue;
        any = true;
        if (seen.count(*c.participants[j]) == 0) {
          fail(path + ".participants[" + std::to_string(j) + "]",
               "entity '" + *c.participants[j] + "' not found");
        }
      }
      if (!any) fail(path + ".participants", "no protagonist");
      s.candidates.push_back(std::move(c));
    }

    s.answer = int_field(root, "answer", "$");
    if (s.answer < 0 || static_cast<std::size_t>(s.answer) >= s.candidates.size()) {
      fail("$.answer", "answer out of range");
    }
    return s;
  }

 private:
  std::size_t line_no_;
};

Json token_json(const Token& t) { return t ? Json(*t) : Json(nullptr); }

Json participants_json(const std::array<std::optional<EntityId>, 3>& p) {
  Json arr = Json::array();
  for (const auto& e : p) arr.push_back(e ? Json(*e) : Json(nullptr));
  return arr;
}

Json sentence_json(const SentenceText& s) {
  Json pos = Json::array();
  for (Pos p : s.pos) pos.push_back(std::string(1, to_char(p)));
  Json spans = Json::array();
  for (const auto& sp : s.event_spans) {
    Json o = Json::object();
    o["event"] = sp.event;
    o["start"] = sp.start;
    o["end"] = sp.end;
    spans.push_back(std::move(o));
  }
  Json o = Json::object();
  o["tokens"] = s.tokens;
  o["pos"] = std::move(pos);
  o["verb_index"] = s.verb_index;
  o["event_spans"] = std::move(spans);
  o["focus_event"] = s.focus_event;
  return o;
}

}  // namespace

Sample parse_sample(std::string_view line, std::size_t line_no) {
  Json root;
  try {
    root = Json::parse(line.begin(), line.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("line " + std::to_string(line_no) + ": $: malformed JSON (" + e.what() + ")");
  }
  return RecordParser(line_no).sample(root);
}

std::vector<Sample> parse_corpus(std::istream& in) {
  std::vector<Sample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_sample(line, line_no));
  }
  return out;
}

std::vector<Sample> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  try {
    return parse_corpus(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string serialize_sample(const Sample& sample) {
  Json root = Json::object();
  root["id"] = sample.id;
  Json entities = Json::array();
  for (const auto& chain : sample.entities) {
    Json events = Json::array();
    for (const auto& e : chain.events) {
      Json o = Json::object();
      o["verb"] = token_json(e.verb);
      o["a0"] = token_json(e.a0);
      o["a1"] = token_json(e.a1);
      o["a2"] = token_json(e.a2);
      o["role"] = std::string(to_string(e.role));
      o["sentence"] = e.sentence ? sentence_json(*e.sentence) : Json(nullptr);
      if (e.has_participants()) o["participants"] = participants_json(e.participants);
      events.push_back(std::move(o));
    }
    Json ent = Json::object();
    ent["eid"] = chain.protagonist;
    ent["chain"] = std::move(events);
    entities.push_back(std::move(ent));
  }
  root["entities"] = std::move(entities);
  Json candidates = Json::array();
  for (const auto& c : sample.candidates) {
    Json o = Json::object();
    o["verb"] = token_json(c.verb);
    o["a0"] = token_json(c.a0);
    o["a1"] = token_json(c.a1);
    o["a2"] = token_json(c.a2);
    o["participants"] = participants_json(c.participants);
    candidates.push_back(std::move(o));
  }
  root["candidates"] = std::move(candidates);
  root["answer"] = sample.answer;
  return root.dump();
}

void write_corpus(std::ostream& out, const std::vector<Sample>& samples) {
  for (const auto& s : samples) out << serialize_sample(s) << '\n';
}

void write_corpus_file(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_corpus(out, samples);
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace mcpred::corpus
