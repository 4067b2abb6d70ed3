#pragma once

#include <string_view>
#include <utility>

#include <fmt/format.h>

namespace mcpred::log {

enum class Level { error = 0, info = 1, debug = 2 };

// Read once from MCPRED_LOG (error|info|debug); info when unset.
Level threshold();
void write(Level level, std::string_view message);

template <typename... Args>
void info(fmt::format_string<Args...> format, Args&&... args) {
  if (threshold() >= Level::info) write(Level::info, fmt::format(format, std::forward<Args>(args)...));
}

template <typename... Args>
void debug(fmt::format_string<Args...> format, Args&&... args) {
  if (threshold() >= Level::debug) write(Level::debug, fmt::format(format, std::forward<Args>(args)...));
}

template <typename... Args>
void error(fmt::format_string<Args...> format, Args&&... args) {
  write(Level::error, fmt::format(format, std::forward<Args>(args)...));
}

}  // namespace mcpred::log
