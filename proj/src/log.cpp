#include "mcpred/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

namespace mcpred::log {

Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("MCPRED_LOG");
    const std::string value = env ? env : "";
    if (value == "error") return Level::error;
    if (value == "debug") return Level::debug;
    return Level::info;
  }();
  return level;
}

void write(Level level, std::string_view message) {
  const char* tag = level == Level::error ? "error" : level == Level::info ? "info" : "debug";
  std::fprintf(stderr, "[%s] %.*s\n", tag, static_cast<int>(message.size()), message.data());
}

}  // namespace mcpred::log
