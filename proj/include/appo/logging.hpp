#pragma once

#include <string>

namespace appo::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Threshold parsed once from the APPO_LAB_LOG environment variable
/// (error|warn|info|debug). Defaults to warn when unset or unrecognized.
Level threshold();

void message(Level level, const std::string& text);

inline void error(const std::string& text) { message(Level::error, text); }
inline void warn(const std::string& text) { message(Level::warn, text); }
inline void info(const std::string& text) { message(Level::info, text); }
inline void debug(const std::string& text) { message(Level::debug, text); }

}  // namespace appo::log
