#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mcpred/types.hpp"

namespace mcpred::corpus {

// Parses one JSON Lines record. Errors carry "line N: <field path>: <reason>".
Sample parse_sample(std::string_view line, std::size_t line_no);

// Blank lines are skipped; every other line must be a valid record.
std::vector<Sample> parse_corpus(std::istream& in);
std::vector<Sample> read_corpus_file(const std::string& path);

// One compact JSON object, no trailing newline.
std::string serialize_sample(const Sample& sample);
void write_corpus(std::ostream& out, const std::vector<Sample>& samples);
void write_corpus_file(const std::string& path, const std::vector<Sample>& samples);

}  // namespace mcpred::corpus
