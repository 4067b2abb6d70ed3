#include "mcpred/model.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mcpred/errors.hpp"

namespace mcpred::model {

using nn::Binder;
using nn::DropoutContext;
using nn::ParamGroup;
using nn::Tensor;
using nn::Var;

EventIds event_ids(const Event& event, const Vocabulary& vocab) {
  return {vocab.id(event.verb), vocab.id(event.a0), vocab.id(event.a1), vocab.id(event.a2)};
}

EncodedSample encode_sample(const Sample& sample, const Vocabulary& vocab, const ModelConfig& config,
                            const text::MaskSet& mask) {
  EncodedSample out;
  out.id = sample.id;
  out.answer = sample.answer;
  for (std::size_t i = 0; i < sample.candidates.size(); ++i) {
    EncodedCandidate cand;
    cand.ids = event_ids(sample.candidates[i], vocab);
    for (auto& derived : derive_chains(sample, i, config.n, config.multi_chain)) {
      std::size_t index = out.chains.size();
      for (std::size_t k = 0; k < out.chains.size(); ++k) {
        if (out.chains[k].entity == derived.chain.protagonist) index = k;
      }
      if (index == out.chains.size()) {
        EncodedChain chain;
        chain.entity = derived.chain.protagonist;
        for (const auto& event : derived.chain.events) {
          EncodedEvent enc;
          enc.ids = event_ids(event, vocab);
          enc.is_null = event.is_null();
          if (config.use_text && event.sentence) {
            const auto& s = *event.sentence;
            const auto converted = text::convert_sentence(s, s.focus_event, event.role);
            const auto masked =
                text::mask_constituents(converted.tokens, converted.pos, converted.verb_index, mask);
            enc.text = text::encode_tokens(masked, vocab, config.max_text_len);
          }
          chain.events.push_back(std::move(enc));
        }
        out.chains.push_back(std::move(chain));
      }
      cand.chains.push_back(ChainRef{derived.slot, index});
    }
    out.candidates.push_back(std::move(cand));
  }
  return out;
}

std::vector<EncodedSample> encode_corpus(const std::vector<Sample>& samples, const Vocabulary& vocab,
                                         const ModelConfig& config, const text::MaskSet& mask) {
  std::vector<EncodedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(encode_sample(s, vocab, config, mask));
  return out;
}

Var encode_events(const Binder& bind, const EventEncoderParams& p, std::span<const EventIds> ids) {
  const Var table = bind(p.words);
  std::array<std::vector<std::int32_t>, 4> columns;
  for (const auto& row : ids) {
    for (std::size_t k = 0; k < 4; ++k) columns[k].push_back(row[k]);
  }
  const nn::ParamId weights[4] = {p.w_v, p.w_a0, p.w_a1, p.w_a2};
  Var acc = nn::matmul(nn::gather_rows(table, columns[0]), bind(weights[0]));
  for (std::size_t k = 1; k < 4; ++k) {
    acc = nn::add(acc, nn::matmul(nn::gather_rows(table, columns[k]), bind(weights[k])));
  }
  return nn::tanh(nn::add(acc, bind(p.b_e)));
}

Var encode_text(const Binder& bind, const EventEncoderParams& words, const TextEncoderParams& p,
                const text::EncodedTokens& tokens, const DropoutContext& drop) {
  if (tokens.ids.empty() || tokens.ids[0] != special::kCls) {
    throw std::invalid_argument("encode_text: ids must begin with [CLS]");
  }
  if (tokens.valid.size() != tokens.ids.size()) throw std::invalid_argument("encode_text: mask length");
  // Trailing padding cannot influence valid positions, so it is not computed.
  std::size_t len = tokens.ids.size();
  while (len > 1 && !tokens.valid[len - 1]) --len;
  const Tensor& positions = bind.params()[p.positions].value;
  if (len > positions.rows()) throw std::invalid_argument("encode_text: sequence longer than max_text_len");

  const std::span<const std::int32_t> ids(tokens.ids.data(), len);
  std::unique_ptr<bool[]> mask;
  std::span<const bool> valid;
  if (std::find(tokens.valid.begin(), tokens.valid.begin() + static_cast<std::ptrdiff_t>(len), false) !=
      tokens.valid.begin() + static_cast<std::ptrdiff_t>(len)) {
    mask = std::make_unique<bool[]>(len);
    for (std::size_t i = 0; i < len; ++i) mask[i] = tokens.valid[i];
    valid = {mask.get(), len};
  }

  Var x = nn::affine(nn::gather_rows(bind(words.words), ids), bind(p.w_in), bind(p.b_in));
  x = nn::add(x, nn::slice_rows(bind(p.positions), 0, len));
  x = nn::apply_dropout(x, drop);
  for (const auto& layer : p.layers) x = nn::encoder_layer(x, layer, bind, valid, drop);
  return nn::slice_rows(x, 0, 1);
}

Var fuse_event_text(Var e, std::optional<Var> sentence) {
  if (!sentence) return e;
  if (sentence->rows() != e.rows() || sentence->cols() != e.cols()) {
    throw std::invalid_argument("fuse_event_text: dimension mismatch");
  }
  return nn::add(e, *sentence);
}

HiddenChainVars model_chain(const Binder& bind, const ChainModelParams& p, Var chain_embeddings,
                            Var candidate_embedding, std::span<const bool> valid, const DropoutContext& drop) {
  const Tensor& positions = bind.params()[p.positions].value;
  const std::size_t n = chain_embeddings.rows();
  if (n + 1 != positions.rows()) throw std::invalid_argument("model_chain: chain length differs from n");
  if (candidate_embedding.rows() != 1 || candidate_embedding.cols() != chain_embeddings.cols()) {
    throw std::invalid_argument("model_chain: candidate embedding shape");
  }
  const Var parts[2] = {chain_embeddings, candidate_embedding};
  Var x = nn::add(nn::concat_rows(parts), bind(p.positions));
  x = nn::apply_dropout(x, drop);
  for (const auto& layer : p.layers) x = nn::encoder_layer(x, layer, bind, valid, drop);
  return {nn::slice_rows(x, 0, n), nn::slice_rows(x, n, 1)};
}

HiddenChain to_hidden_chain(const HiddenChainVars& vars) {
  HiddenChain out;
  const Tensor& h = vars.h.value();
  for (std::size_t r = 0; r < h.rows(); ++r) {
    const auto row = h.row_span(r);
    out.h.emplace_back(row.begin(), row.end());
  }
  const auto hc = vars.h_c.value().values();
  out.h_c.assign(hc.begin(), hc.end());
  return out;
}

Model::Model(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size), has_text_encoder_(config.use_text) {
  config_.validate();
  const std::size_t dw = config_.d_w, de = config_.d_e;
  event_.words = params_.add("embedding.words", nn::init_uniform(vocab_size, dw, 0.05, seed, "embedding.words"));
  auto xavier = [&](const std::string& name, std::size_t in, std::size_t out, ParamGroup group) {
    return params_.add(name, nn::init_xavier(in, out, seed, name), group);
  };
  event_.w_v = xavier("event.w_v", dw, de, ParamGroup::main);
  event_.w_a0 = xavier("event.w_a0", dw, de, ParamGroup::main);
  event_.w_a1 = xavier("event.w_a1", dw, de, ParamGroup::main);
  event_.w_a2 = xavier("event.w_a2", dw, de, ParamGroup::main);
  event_.b_e = params_.add("event.b_e", Tensor(1, de, 0.0));

  if (has_text_encoder_) {
    text_.w_in = xavier("text.w_in", dw, de, ParamGroup::text);
    text_.b_in = params_.add("text.b_in", Tensor(1, de, 0.0), ParamGroup::text);
    text_.positions = params_.add(
        "text.positions", nn::init_uniform(config_.max_text_len, de, 0.05, seed, "text.positions"), ParamGroup::text);
    for (std::size_t l = 0; l < config_.text_layers; ++l) {
      text_.layers.push_back(nn::EncoderLayerParams::create(params_, "text.layer" + std::to_string(l), de,
                                                            config_.text_heads, config_.text_ffn, ParamGroup::text,
                                                            seed));
    }
  }

  chain_.positions =
      params_.add("chain.positions", nn::init_uniform(config_.n + 1, de, 0.05, seed, "chain.positions"));
  for (std::size_t l = 0; l < config_.chain_layers; ++l) {
    chain_.layers.push_back(nn::EncoderLayerParams::create(params_, "chain.layer" + std::to_string(l), de,
                                                           config_.chain_heads, config_.chain_ffn, ParamGroup::main,
                                                           seed));
  }
  scoring_ = scoring::ScoringParams::create(params_, config_, seed);
}

ForwardResult Model::forward(const Binder& bind, const EncodedSample& sample, const DropoutContext& drop) const {
  const std::size_t n = config_.n;
  nn::Tape& tape = bind.tape();

  std::vector<Var> chain_embeddings;
  chain_embeddings.reserve(sample.chains.size());
  for (const auto& chain : sample.chains) {
    if (chain.events.size() != n) throw std::invalid_argument("encoded chain length differs from n");
    std::vector<EventIds> ids;
    for (const auto& e : chain.events) ids.push_back(e.ids);
    Var e = encode_events(bind, event_, ids);
    bool any_text = false;
    if (config_.use_text) {
      for (const auto& ev : chain.events) any_text = any_text || ev.text.has_value();
    }
    if (any_text) {
      std::vector<Var> rows;
      std::optional<Var> zero;
      for (const auto& ev : chain.events) {
        if (ev.text) {
          rows.push_back(encode_text(bind, event_, text_, *ev.text, drop));
        } else {
          if (!zero) zero = tape.constant(Tensor(1, config_.d_e, 0.0));
          rows.push_back(*zero);
        }
      }
      e = fuse_event_text(e, nn::concat_rows(rows));
    }
    chain_embeddings.push_back(e);
  }

  std::vector<EventIds> cand_ids;
  for (const auto& c : sample.candidates) cand_ids.push_back(c.ids);
  const Var cand_embeddings = encode_events(bind, event_, cand_ids);

  ForwardResult result;
  std::vector<Var> o_terms;
  for (std::size_t i = 0; i < sample.candidates.size(); ++i) {
    const auto& cand = sample.candidates[i];
    const Var e_c = nn::slice_rows(cand_embeddings, i, 1);
    CandidateVars cv;
    std::vector<Var> f_terms;
    for (const auto& ref : cand.chains) {
      if (!config_.multi_chain && !f_terms.empty()) break;
      const auto& chain = sample.chains[ref.chain];
      auto history_valid = std::make_unique<bool[]>(n);
      for (std::size_t k = 0; k < n; ++k) history_valid[k] = !chain.events[k].is_null;

      std::unique_ptr<bool[]> seq_valid;
      std::span<const bool> seq_mask;
      if (config_.mask_null_in_chain) {
        seq_valid = std::make_unique<bool[]>(n + 1);
        std::copy_n(history_valid.get(), n, seq_valid.get());
        seq_valid[n] = true;
        seq_mask = {seq_valid.get(), n + 1};
      }
      const auto hidden = model_chain(bind, chain_, chain_embeddings[ref.chain], e_c, seq_mask, drop);

      std::span<const bool> score_mask;
      if (config_.mask_null_in_score) score_mask = {history_valid.get(), n};
      auto sc = scoring::score_chain(hidden.h, hidden.h_c, config_, scoring_, bind, score_mask);
      f_terms.push_back(sc.f);
      cv.chains.push_back(sc);
    }
    cv.o = scoring::aggregate_terms(f_terms);
    o_terms.push_back(cv.o);
    result.candidates.push_back(std::move(cv));
  }
  result.logits = nn::concat_cols(o_terms);
  return result;
}

void Model::copy_shared_parameters(const Model& other) {
  for (auto& p : params_.all()) {
    if (auto id = other.params_.find(p.name)) {
      const Tensor& src = other.params_[*id].value;
      if (!src.same_shape(p.value)) throw std::invalid_argument("shape mismatch copying " + p.name);
      p.value = src;
    }
  }
}

scoring::ScoreBreakdown breakdown_from(const ForwardResult& result, const EncodedSample& sample) {
  scoring::ScoreBreakdown out;
  auto column = [](Var v) {
    const auto vals = v.value().values();
    return std::vector<double>(vals.begin(), vals.end());
  };
  std::vector<double> o;
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    const auto& cv = result.candidates[i];
    scoring::CandidateScore cs;
    for (std::size_t j = 0; j < cv.chains.size(); ++j) {
      const auto& sc = cv.chains[j];
      const auto& ref = sample.candidates[i].chains[j];
      scoring::ChainScore chs;
      chs.slot = ref.slot;
      chs.entity = sample.chains[ref.chain].entity;
      chs.s = column(sc.s);
      if (sc.u) chs.u = column(*sc.u);
      chs.alpha = column(sc.alpha);
      chs.f = sc.f.value().item();
      cs.chains.push_back(std::move(chs));
    }
    cs.o = cv.o.value().item();
    o.push_back(cs.o);
    out.candidates.push_back(std::move(cs));
  }
  out.pr = scoring::candidate_distribution(o);
  out.prediction = scoring::predict(out.pr);
  return out;
}

scoring::ScoreBreakdown score_sample(const Model& model, const EncodedSample& sample) {
  nn::Tape tape(false);
  const Binder bind(tape, model.params(), nullptr);
  const auto result = model.forward(bind, sample, DropoutContext{});
  return breakdown_from(result, sample);
}

std::string config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["n"] = c.n;
  j["m"] = c.m;
  j["d_w"] = c.d_w;
  j["d_e"] = c.d_e;
  j["chain_layers"] = c.chain_layers;
  j["chain_ffn"] = c.chain_ffn;
  j["chain_heads"] = c.chain_heads;
  j["text_layers"] = c.text_layers;
  j["text_heads"] = c.text_heads;
  j["text_ffn"] = c.text_ffn;
  j["max_text_len"] = c.max_text_len;
  j["dropout"] = c.dropout;
  j["score_variant"] = std::string(to_string(c.score_variant));
  j["attention_variant"] = std::string(to_string(c.attention_variant));
  j["multi_chain"] = c.multi_chain;
  j["use_text"] = c.use_text;
  j["mask_null_in_chain"] = c.mask_null_in_chain;
  j["mask_null_in_score"] = c.mask_null_in_score;
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.n = j.at("n").get<std::size_t>();
    c.m = j.at("m").get<std::size_t>();
    c.d_w = j.at("d_w").get<std::size_t>();
    c.d_e = j.at("d_e").get<std::size_t>();
    c.chain_layers = j.at("chain_layers").get<std::size_t>();
    c.chain_ffn = j.at("chain_ffn").get<std::size_t>();
    c.chain_heads = j.at("chain_heads").get<std::size_t>();
    c.text_layers = j.at("text_layers").get<std::size_t>();
    c.text_heads = j.at("text_heads").get<std::size_t>();
    c.text_ffn = j.at("text_ffn").get<std::size_t>();
    c.max_text_len = j.at("max_text_len").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.score_variant = parse_score_variant(j.at("score_variant").get<std::string>());
    c.attention_variant = parse_attention_variant(j.at("attention_variant").get<std::string>());
    c.multi_chain = j.at("multi_chain").get<bool>();
    c.use_text = j.at("use_text").get<bool>();
    c.mask_null_in_chain = j.at("mask_null_in_chain").get<bool>();
    c.mask_null_in_score = j.at("mask_null_in_score").get<bool>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
}

nn::CheckpointData make_checkpoint(const Model& model, const Vocabulary& vocab) {
  nlohmann::ordered_json meta;
  meta["config"] = nlohmann::ordered_json::parse(config_to_json(model.config()));
  meta["has_text_encoder"] = model.has_text_encoder();
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < vocab.size(); ++i) tokens.push_back(vocab.token(static_cast<TokenId>(i)));
  meta["vocab"] = tokens;
  nn::CheckpointData data;
  data.metadata = meta.dump();
  for (const auto& p : model.params().all()) data.tensors.push_back({p.name, p.value});
  return data;
}

LoadedModel model_from_checkpoint(const nn::CheckpointData& data) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(data.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
  if (!meta.contains("config") || !meta.contains("vocab") || !meta.contains("has_text_encoder")) {
    throw DataError("checkpoint metadata incomplete");
  }
  ModelConfig config = config_from_json(meta["config"].dump());
  const bool text = meta["has_text_encoder"].get<bool>();
  const bool runtime_text = config.use_text;
  config.use_text = text;

  Vocabulary vocab;
  const auto& toks = meta["vocab"];
  for (std::size_t i = special::kReservedCount; i < toks.size(); ++i) vocab.add(toks[i].get<std::string>());
  if (vocab.size() != toks.size()) throw DataError("checkpoint vocabulary has duplicates");

  Model model(config, vocab.size(), 0);
  model.set_use_text(runtime_text);
  if (data.tensors.size() != model.params().size()) throw DataError("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < data.tensors.size(); ++i) {
    auto& p = model.params()[i];
    const auto& t = data.tensors[i];
    if (t.name != p.name || !t.value.same_shape(p.value)) {
      throw DataError("checkpoint tensor '" + t.name + "' does not match the model layout");
    }
    p.value = t.value;
  }
  return LoadedModel{std::move(model), std::move(vocab)};
}

std::size_t load_word_vectors(const std::string& path, const Vocabulary& vocab, Model& model) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word vectors '" + path + "'");
  Tensor& table = model.params()[model.event_params().words].value;
  const std::size_t dw = table.cols();
  std::string line;
  std::size_t line_no = 0, loaded = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> values;
    double v = 0.0;
    while (ss >> v) values.push_back(v);
    if (!ss.eof()) throw DataError(path + ": line " + std::to_string(line_no) + ": bad number");
    if (values.size() != dw) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": expected " + std::to_string(dw) + " values");
    }
    if (!vocab.contains(token)) continue;
    const auto id = static_cast<std::size_t>(vocab.id(token));
    std::copy(values.begin(), values.end(), table.row_span(id).begin());
    ++loaded;
  }
  return loaded;
}

}  // namespace mcpred::model
