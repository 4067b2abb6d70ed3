#include <doctest.h>

#include <set>
#include <sstream>

#include "mcpred/errors.hpp"
#include "mcpred/run_config.hpp"

using namespace mcpred;

namespace {

RunConfig from_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  apply_config_stream(c, in);
  return c;
}

}  // namespace

TEST_CASE("keys set their fields") {
  const RunConfig c = from_text(
      "# comment\n"
      "\n"
      "score = L\n"
      "attention = additive\n"
      "single-chain = true\n"
      "no-text = yes\n"
      "mask = V,R\n"
      "n = 6\n"
      "d-e = 32\n"
      "lr = 0.01\n"
      "lr-text = 0.002\n"
      "lambda = 0\n"
      "batch-size = 7\n"
      "seed = 42\n"
      "threads = 3\n"
      "task = text\n"
      "n-samples = 11\n"
      "corpus = a.jsonl\n"
      "dev = b.jsonl\n"
      "explain = 1\n");
  CHECK(c.model.score_variant == ScoreVariant::L);
  CHECK(c.model.attention_variant == AttentionVariant::additive);
  CHECK_FALSE(c.model.multi_chain);
  CHECK_FALSE(c.model.use_text);
  CHECK(c.mask == text::MaskSet::parse("V,R"));
  CHECK(c.model.n == 6);
  CHECK(c.model.d_e == 32);
  CHECK(c.train.lr_main == 0.01);
  CHECK(c.train.lr_text == 0.002);
  CHECK(c.train.lambda == 0.0);
  CHECK(c.train.batch_size == 7);
  CHECK(c.train.seed == 42);
  CHECK(c.train.threads == 3);
  CHECK(c.synth.task == corpus::SynthTask::text);
  CHECK(c.synth.n_samples == 11);
  CHECK(c.corpus == "a.jsonl");
  CHECK(c.dev == "b.jsonl");
  CHECK(c.explain);
}

TEST_CASE("errors name the key and line") {
  CHECK_THROWS_WITH_AS(from_text("n = 4\ncolour = red\n"), "line 2: unknown key 'colour'", ConfigError);
  CHECK_THROWS_WITH_AS(from_text("n = four\n"), "line 1: n: invalid number 'four'", ConfigError);
  CHECK_THROWS_WITH_AS(from_text("\njust words\n"), "line 2: expected key = value", ConfigError);
  CHECK_THROWS_AS(from_text("no-text = maybe\n"), ConfigError);
  CHECK_THROWS_AS(from_text("score = Z\n"), ConfigError);
  CHECK_THROWS_AS(from_text("mask = V,Q\n"), ConfigError);
  RunConfig c;
  CHECK_THROWS_AS(apply_config_file(c, "/nonexistent/x.cfg"), ConfigError);
}

TEST_CASE("option names are unique and flag-shaped") {
  std::set<std::string> names;
  for (const auto& def : option_defs()) {
    CHECK(names.insert(def.name).second);
    CHECK_FALSE(def.help.empty());
    CHECK(def.name.find('_') == std::string::npos);
    CHECK(find_option(def.name) == &def);
  }
  for (const char* required : {"config", "corpus", "dev", "out", "checkpoint", "seed", "threads", "score",
                               "attention", "single-chain", "no-text", "mask", "task", "n-samples", "explain"}) {
    if (std::string(required) == "config") continue;  // handled by the CLI itself
    CHECK(names.count(required) == 1);
  }
  CHECK(find_option("nope") == nullptr);
}

TEST_CASE("dump and apply are inverse") {
  RunConfig c = from_text(
      "score = M\nattention = dot\nmask = N,J\nn = 5\nlr = 0.000125\nlambda = 3e-07\n"
      "shared-sentence-rate = 0.25\nout = x.bin\nsingle-chain = true\n");
  const std::string dumped = dump_config(c);
  const RunConfig again = from_text(dumped);
  CHECK(dump_config(again) == dumped);
  CHECK(again.model == c.model);
  CHECK(again.mask == c.mask);
  CHECK(again.train.lr_main == c.train.lr_main);
  CHECK(again.train.lambda == c.train.lambda);
  CHECK(again.synth.shared_sentence_rate == c.synth.shared_sentence_rate);
  CHECK(again.out == "x.bin");

  // Every key appears exactly once.
  std::istringstream in(dumped);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == option_defs().size());
}

TEST_CASE("shipped configuration files parse and validate") {
  for (const char* name : {"default.cfg", "synthetic.cfg", "tiny.cfg"}) {
    RunConfig c;
    CHECK_NOTHROW(apply_config_file(c, std::string(MCPRED_SOURCE_DIR) + "/configs/" + name));
    CHECK_NOTHROW(c.model.validate());
    CHECK_NOTHROW(c.train.validate());
  }
  RunConfig d;
  apply_config_file(d, std::string(MCPRED_SOURCE_DIR) + "/configs/default.cfg");
  CHECK(d.model == ModelConfig{});
  CHECK(d.train.batch_size == 100);
}
