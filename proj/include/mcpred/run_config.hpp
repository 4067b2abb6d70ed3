#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcpred/synthetic.hpp"
#include "mcpred/text.hpp"
#include "mcpred/train.hpp"
#include "mcpred/types.hpp"

namespace mcpred {

struct RunConfig {
  ModelConfig model;
  train::TrainConfig train;
  corpus::SynthConfig synth;
  text::MaskSet mask;
  std::size_t min_count = 1;
  std::string corpus;
  std::string dev;
  std::string out;
  std::string checkpoint;
  std::string metrics;
  std::string word_vectors;
  std::string axis;
  bool explain = false;
};

// One configuration key. The same name is the config-file key and, with a
// "--" prefix, the command-line flag.
struct OptionDef {
  std::string name;
  std::string help;
  bool is_switch = false;  // takes no value on the command line
  std::function<void(RunConfig&, std::string_view)> apply;
};

const std::vector<OptionDef>& option_defs();
const OptionDef* find_option(std::string_view name);

// Applies one key. Throws ConfigError for unknown keys and bad values.
void apply_option(RunConfig& config, std::string_view key, std::string_view value);

// "key = value" lines; blank lines and lines starting with '#' are skipped.
// Errors name the line number.
void apply_config_stream(RunConfig& config, std::istream& in);
void apply_config_file(RunConfig& config, const std::string& path);

// Writes every key with its current value, in option_defs() order.
std::string dump_config(const RunConfig& config);

}  // namespace mcpred
