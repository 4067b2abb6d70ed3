#include "mcpred/run_config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include <fmt/format.h>

#include "mcpred/errors.hpp"

namespace mcpred {

namespace {

std::string_view trim(std::string_view s) {
  const auto space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(fmt::format("{}: invalid number '{}'", key, text));
  }
  return value;
}

std::size_t parse_count(std::string_view key, std::string_view text) {
  return parse_number<std::size_t>(key, text);
}

double parse_real(std::string_view key, std::string_view text) { return parse_number<double>(key, text); }

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

std::vector<OptionDef> build_defs() {
  std::vector<OptionDef> s;
  auto path = [&](const char* name, const char* help, std::string RunConfig::*field) {
    s.push_back({name, help, false, [field](RunConfig& c, std::string_view v) { c.*field = std::string(v); }});
  };
  auto count = [&](const char* name, const char* help, auto setter) {
    s.push_back({name, help, false, [name, setter](RunConfig& c, std::string_view v) {
                   setter(c, parse_count(name, v));
                 }});
  };
  auto real = [&](const char* name, const char* help, auto setter) {
    s.push_back({name, help, false, [name, setter](RunConfig& c, std::string_view v) {
                   setter(c, parse_real(name, v));
                 }});
  };
  auto flag = [&](const char* name, const char* help, auto setter) {
    s.push_back({name, help, true, [name, setter](RunConfig& c, std::string_view v) {
                   setter(c, parse_bool(name, v));
                 }});
  };

  path("corpus", "input corpus (JSON Lines)", &RunConfig::corpus);
  path("dev", "development corpus used for checkpoint selection", &RunConfig::dev);
  path("out", "output file", &RunConfig::out);
  path("checkpoint", "model checkpoint to read", &RunConfig::checkpoint);
  path("metrics", "metrics CSV written by train", &RunConfig::metrics);
  path("word-vectors", "pre-trained word vectors (token v1 ... v_dw)", &RunConfig::word_vectors);
  s.push_back({"seed", "root random seed", false, [](RunConfig& c, std::string_view v) {
                 c.train.seed = parse_number<std::uint64_t>("seed", v);
               }});
  count("threads", "worker threads (results do not depend on it)", [](RunConfig& c, std::size_t v) {
    c.train.threads = v;
  });

  s.push_back({"score", "event score: E, C, M or L", false, [](RunConfig& c, std::string_view v) {
                 c.model.score_variant = parse_score_variant(v);
               }});
  s.push_back({"attention", "chain attention: scaled_dot, dot, additive or avg", false,
               [](RunConfig& c, std::string_view v) { c.model.attention_variant = parse_attention_variant(v); }});
  flag("single-chain", "score each candidate against one chain only",
       [](RunConfig& c, bool on) { c.model.multi_chain = !on; });
  flag("no-text", "build the model without the sentence encoder", [](RunConfig& c, bool on) {
    c.model.use_text = !on;
  });
  s.push_back({"mask", "constituents hidden from sentences: CSV of V,N,J,R,V_self,V_others", false,
               [](RunConfig& c, std::string_view v) { c.mask = text::MaskSet::parse(v); }});
  flag("mask-null-chain", "hide null padding events from chain attention",
       [](RunConfig& c, bool on) { c.model.mask_null_in_chain = on; });
  flag("mask-null-score", "leave null padding events out of the chain score",
       [](RunConfig& c, bool on) { c.model.mask_null_in_score = on; });

  count("n", "chain length", [](RunConfig& c, std::size_t v) { c.model.n = v; });
  count("d-w", "word embedding size", [](RunConfig& c, std::size_t v) { c.model.d_w = v; });
  count("d-e", "event embedding size", [](RunConfig& c, std::size_t v) { c.model.d_e = v; });
  count("chain-layers", "chain encoder layers", [](RunConfig& c, std::size_t v) { c.model.chain_layers = v; });
  count("chain-heads", "chain encoder heads", [](RunConfig& c, std::size_t v) { c.model.chain_heads = v; });
  count("chain-ffn", "chain encoder feed-forward size", [](RunConfig& c, std::size_t v) { c.model.chain_ffn = v; });
  count("text-layers", "sentence encoder layers", [](RunConfig& c, std::size_t v) { c.model.text_layers = v; });
  count("text-heads", "sentence encoder heads", [](RunConfig& c, std::size_t v) { c.model.text_heads = v; });
  count("text-ffn", "sentence encoder feed-forward size", [](RunConfig& c, std::size_t v) { c.model.text_ffn = v; });
  count("max-text-len", "sentence length including [CLS]", [](RunConfig& c, std::size_t v) {
    c.model.max_text_len = v;
  });
  real("dropout", "dropout rate", [](RunConfig& c, double v) { c.model.dropout = v; });

  count("epochs", "training epochs", [](RunConfig& c, std::size_t v) { c.train.epochs = v; });
  count("batch-size", "samples per step", [](RunConfig& c, std::size_t v) { c.train.batch_size = v; });
  real("lr", "learning rate", [](RunConfig& c, double v) { c.train.lr_main = v; });
  real("lr-text", "sentence encoder learning rate", [](RunConfig& c, double v) { c.train.lr_text = v; });
  real("lambda", "L2 factor", [](RunConfig& c, double v) { c.train.lambda = v; });
  count("patience", "stop after this many epochs without dev improvement (0 = never)",
        [](RunConfig& c, std::size_t v) { c.train.patience = v; });
  count("min-count", "minimum frequency of sentence tokens in the vocabulary",
        [](RunConfig& c, std::size_t v) { c.min_count = v; });

  s.push_back({"task", "synthetic task: multichain, text or combined", false,
               [](RunConfig& c, std::string_view v) { c.synth.task = corpus::parse_synth_task(v); }});
  count("n-samples", "synthetic samples", [](RunConfig& c, std::size_t v) { c.synth.n_samples = v; });
  count("chain-length", "longest synthetic chain", [](RunConfig& c, std::size_t v) { c.synth.chain_length = v; });
  count("min-length", "shortest synthetic chain", [](RunConfig& c, std::size_t v) { c.synth.min_length = v; });
  count("key-verbs", "synthetic key verbs per protagonist", [](RunConfig& c, std::size_t v) {
    c.synth.key_verbs = v;
  });
  count("filler-verbs", "synthetic filler verbs", [](RunConfig& c, std::size_t v) { c.synth.filler_verbs = v; });
  count("nouns", "synthetic nouns", [](RunConfig& c, std::size_t v) { c.synth.nouns = v; });
  count("adjectives", "synthetic filler adjectives", [](RunConfig& c, std::size_t v) { c.synth.adjectives = v; });
  real("shared-sentence-rate", "probability that two synthetic events share a sentence",
       [](RunConfig& c, double v) { c.synth.shared_sentence_rate = v; });

  flag("explain", "predict: write per-chain score breakdowns", [](RunConfig& c, bool on) { c.explain = on; });
  s.push_back({"axis", "ablate: score, attention, mask or chain-text", false,
               [](RunConfig& c, std::string_view v) { c.axis = std::string(v); }});
  return s;
}

std::string bool_text(bool v) { return v ? "true" : "false"; }

}  // namespace

const std::vector<OptionDef>& option_defs() {
  static const std::vector<OptionDef> defs = build_defs();
  return defs;
}

const OptionDef* find_option(std::string_view name) {
  for (const auto& def : option_defs()) {
    if (def.name == name) return &def;
  }
  return nullptr;
}

void apply_option(RunConfig& config, std::string_view key, std::string_view value) {
  const OptionDef* def = find_option(key);
  if (!def) throw ConfigError(fmt::format("unknown key '{}'", key));
  def->apply(config, value);
}

void apply_config_stream(RunConfig& config, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected key = value", line_no));
    }
    try {
      apply_option(config, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  try {
    apply_config_stream(config, in);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

std::string dump_config(const RunConfig& c) {
  const auto& m = c.model;
  const auto& t = c.train;
  const auto& s = c.synth;
  std::string out;
  auto put = [&](std::string_view key, const std::string& value) { out += fmt::format("{} = {}\n", key, value); };
  put("corpus", c.corpus);
  put("dev", c.dev);
  put("out", c.out);
  put("checkpoint", c.checkpoint);
  put("metrics", c.metrics);
  put("word-vectors", c.word_vectors);
  put("seed", std::to_string(t.seed));
  put("threads", std::to_string(t.threads));
  put("score", std::string(to_string(m.score_variant)));
  put("attention", std::string(to_string(m.attention_variant)));
  put("single-chain", bool_text(!m.multi_chain));
  put("no-text", bool_text(!m.use_text));
  put("mask", c.mask.to_string());
  put("mask-null-chain", bool_text(m.mask_null_in_chain));
  put("mask-null-score", bool_text(m.mask_null_in_score));
  put("n", std::to_string(m.n));
  put("d-w", std::to_string(m.d_w));
  put("d-e", std::to_string(m.d_e));
  put("chain-layers", std::to_string(m.chain_layers));
  put("chain-heads", std::to_string(m.chain_heads));
  put("chain-ffn", std::to_string(m.chain_ffn));
  put("text-layers", std::to_string(m.text_layers));
  put("text-heads", std::to_string(m.text_heads));
  put("text-ffn", std::to_string(m.text_ffn));
  put("max-text-len", std::to_string(m.max_text_len));
  put("dropout", fmt::format("{}", m.dropout));
  put("epochs", std::to_string(t.epochs));
  put("batch-size", std::to_string(t.batch_size));
  put("lr", fmt::format("{}", t.lr_main));
  put("lr-text", fmt::format("{}", t.lr_text));
  put("lambda", fmt::format("{}", t.lambda));
  put("patience", std::to_string(t.patience));
  put("min-count", std::to_string(c.min_count));
  put("task", std::string(corpus::to_string(s.task)));
  put("n-samples", std::to_string(s.n_samples));
  put("chain-length", std::to_string(s.chain_length));
  put("min-length", std::to_string(s.min_length));
  put("key-verbs", std::to_string(s.key_verbs));
  put("filler-verbs", std::to_string(s.filler_verbs));
  put("nouns", std::to_string(s.nouns));
  put("adjectives", std::to_string(s.adjectives));
  put("shared-sentence-rate", fmt::format("{}", s.shared_sentence_rate));
  put("explain", bool_text(c.explain));
  put("axis", c.axis);
  return out;
}

}  // namespace mcpred
