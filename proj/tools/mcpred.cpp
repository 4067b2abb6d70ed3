// Command-line front end: synth, vocab, train, eval, predict, ablate, gradcheck.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numeric failure (non-finite loss, failed gradient check).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mcpred/corpus.hpp"
#include "mcpred/errors.hpp"
#include "mcpred/log.hpp"
#include "mcpred/model.hpp"
#include "mcpred/random.hpp"
#include "mcpred/run_config.hpp"
#include "mcpred/synthetic.hpp"
#include "mcpred/train.hpp"
#include "mcpred/vocabulary.hpp"

namespace {

using namespace mcpred;

constexpr double kGradcheckThreshold = 1e-4;

struct Args {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
};

void register_options(CLI::App& cmd, Args& args) {
  cmd.add_option("--config", args.config_path, "key = value file; flags given here override it");
  for (const auto& def : option_defs()) {
    const std::string flag = "--" + def.name;
    if (def.is_switch) {
      cmd.add_flag(flag, args.switches[def.name], def.help);
    } else {
      cmd.add_option(flag, args.values[def.name], def.help);
    }
  }
}

RunConfig resolve(const CLI::App& cmd, const Args& args) {
  RunConfig config;
  if (!args.config_path.empty()) apply_config_file(config, args.config_path);
  for (const auto& def : option_defs()) {
    if (cmd.count("--" + def.name) == 0) continue;
    if (def.is_switch) {
      def.apply(config, args.switches.at(def.name) ? "true" : "false");
    } else {
      def.apply(config, args.values.at(def.name));
    }
  }
  config.model.validate();
  config.train.validate();
  config.mask.validate();
  return config;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(fmt::format("--{} is required", flag));
}

// Writes to `path`, or standard output when it is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path));
  out << text;
  if (!out) throw DataError(fmt::format("write failed for '{}'", path));
}

train::ProgressFn progress_logger() {
  return [](std::size_t epoch, double loss, std::optional<double> dev) {
    if (dev) {
      log::info("epoch {} loss {:.6f} dev {:.4f}", epoch, loss, *dev);
    } else {
      log::info("epoch {} loss {:.6f}", epoch, loss);
    }
  };
}

model::LoadedModel load_model(const RunConfig& config) {
  require(config.checkpoint, "checkpoint");
  auto loaded = model::model_from_checkpoint(nn::load_checkpoint_file(config.checkpoint));
  // Runtime switches only ever narrow what the checkpoint supports.
  if (!config.model.use_text) loaded.model.set_use_text(false);
  if (!config.model.multi_chain) loaded.model.set_multi_chain(false);
  return loaded;
}

int run_synth(const RunConfig& config) {
  const auto samples = corpus::generate_synthetic(config.synth, config.train.seed);
  std::string text;
  for (const auto& s : samples) {
    text += corpus::serialize_sample(s);
    text += '\n';
  }
  emit(config.out, text);
  log::info("wrote {} {} samples", samples.size(), corpus::to_string(config.synth.task));
  return 0;
}

int run_vocab(const RunConfig& config) {
  require(config.corpus, "corpus");
  const auto vocab = build_vocabulary(corpus::read_corpus_file(config.corpus), config.min_count);
  std::ostringstream out;
  vocab.save(out);
  emit(config.out, out.str());
  log::info("vocabulary of {} tokens", vocab.size());
  return 0;
}

int run_train(const RunConfig& config) {
  require(config.corpus, "corpus");
  require(config.out, "out");
  const auto samples = corpus::read_corpus_file(config.corpus);
  std::optional<std::vector<Sample>> dev_samples;
  if (!config.dev.empty()) dev_samples = corpus::read_corpus_file(config.dev);

  const Vocabulary vocab = build_vocabulary(samples, config.min_count);
  model::Model model(config.model, vocab.size(), derive_seed(config.train.seed, "init"));
  if (!config.word_vectors.empty()) {
    const auto replaced = model::load_word_vectors(config.word_vectors, vocab, model);
    log::info("loaded {} word vectors", replaced);
  }
  const auto train_set = model::encode_corpus(samples, vocab, config.model, config.mask);
  std::vector<model::EncodedSample> dev_set;
  if (dev_samples) dev_set = model::encode_corpus(*dev_samples, vocab, config.model, config.mask);
  log::info("training on {} samples, {} parameters", train_set.size(), model.params().scalar_count());

  const auto result =
      train::train_model(model, train_set, dev_samples ? &dev_set : nullptr, config.train, progress_logger());

  nn::save_checkpoint_file(config.out, model::make_checkpoint(model, vocab));
  std::ostringstream metrics;
  train::write_metrics_csv(metrics, result.metrics);
  emit(config.metrics.empty() ? config.out + ".metrics.csv" : config.metrics, metrics.str());
  if (dev_samples) {
    std::cout << fmt::format("best_dev_accuracy {:.6f} epoch {}\n", result.best_dev_accuracy, result.best_epoch);
  }
  return 0;
}

int run_eval(const RunConfig& config) {
  require(config.corpus, "corpus");
  const auto loaded = load_model(config);
  const auto samples = corpus::read_corpus_file(config.corpus);
  const auto set = model::encode_corpus(samples, loaded.vocab, loaded.model.config(), config.mask);
  const double acc = train::evaluate_accuracy(loaded.model, set, config.train.threads);
  emit(config.out, fmt::format("accuracy {:.17g}\n", acc));
  return 0;
}

int run_predict(const RunConfig& config) {
  require(config.corpus, "corpus");
  const auto loaded = load_model(config);
  const auto samples = corpus::read_corpus_file(config.corpus);
  std::string text;
  for (const auto& sample : samples) {
    const auto encoded = model::encode_sample(sample, loaded.vocab, loaded.model.config(), config.mask);
    const auto breakdown = model::score_sample(loaded.model, encoded);
    if (config.explain) {
      text += scoring::breakdown_json_lines(sample.id, breakdown, sample.answer);
    } else {
      nlohmann::ordered_json line;
      line["sample"] = sample.id;
      line["prediction"] = breakdown.prediction;
      line["pr"] = breakdown.pr;
      text += line.dump();
      text += '\n';
    }
  }
  emit(config.out, text);
  return 0;
}

int run_ablate(const RunConfig& config) {
  require(config.axis, "axis");
  require(config.dev, "dev");
  const auto axis = train::parse_sweep_axis(config.axis);
  const auto eval_samples = corpus::read_corpus_file(config.dev);
  train::AblationReport report;
  if (axis == train::SweepAxis::mask_set && !config.checkpoint.empty()) {
    const auto loaded = load_model(config);
    report = train::run_mask_ablation(loaded.model, loaded.vocab, eval_samples, config.train.threads);
  } else {
    require(config.corpus, "corpus");
    const auto train_samples = corpus::read_corpus_file(config.corpus);
    report = train::run_ablation(axis, train_samples, eval_samples, config.model, config.train, progress_logger());
  }
  emit(config.out, report.to_csv());
  return 0;
}

int run_gradcheck(const RunConfig& config) {
  const auto samples = config.corpus.empty() ? corpus::generate_synthetic(config.synth, config.train.seed)
                                             : corpus::read_corpus_file(config.corpus);
  const Vocabulary vocab = build_vocabulary(samples, config.min_count);
  model::Model model(config.model, vocab.size(), derive_seed(config.train.seed, "init"));
  const auto set = model::encode_corpus(samples, vocab, config.model, config.mask);
  const auto r = train::check_gradients(model, set, config.train.lambda);
  std::cout << fmt::format("max_relative_error {:.6e}\nworst {}[{}] analytic {:.12e} numeric {:.12e}\ncoordinates {}\n",
                           r.max_relative_error, r.worst_parameter, r.worst_index, r.analytic, r.numeric,
                           r.coordinates);
  return r.max_relative_error < kGradcheckThreshold ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCPredictor script event prediction"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  struct Command {
    const char* name;
    const char* description;
    int (*run)(const RunConfig&);
  };
  const Command commands[] = {
      {"synth", "generate a synthetic corpus", run_synth},
      {"vocab", "build the vocabulary of a corpus", run_vocab},
      {"train", "train a model and write a checkpoint and metrics CSV", run_train},
      {"eval", "accuracy of a checkpoint on a corpus", run_eval},
      {"predict", "candidate distributions, or score breakdowns with --explain", run_predict},
      {"ablate", "variant sweep report (CSV)", run_ablate},
      {"gradcheck", "finite-difference gradient check", run_gradcheck},
  };
  std::vector<Args> args(std::size(commands));
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* sub = app.add_subcommand(commands[i].name, commands[i].description);
    register_options(*sub, args[i]);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].run(resolve(*subs[i], args[i]));
    }
    std::cerr << app.help();
    return 1;
  } catch (const ConfigError& e) {
    log::error("{}", e.what());
    return 1;
  } catch (const DataError& e) {
    log::error("{}", e.what());
    return 2;
  } catch (const NumericError& e) {
    log::error("{}", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    log::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    log::error("{}", e.what());
    return 2;
  }
}
