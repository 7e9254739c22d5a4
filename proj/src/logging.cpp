#include "appo/logging.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace appo::log {

namespace {

Level parse_env() {
  const char* raw = std::getenv("APPO_LAB_LOG");
  if (raw == nullptr) return Level::warn;
  if (std::strcmp(raw, "error") == 0) return Level::error;
  if (std::strcmp(raw, "warn") == 0) return Level::warn;
  if (std::strcmp(raw, "info") == 0) return Level::info;
  if (std::strcmp(raw, "debug") == 0) return Level::debug;
  return Level::warn;
}

const char* tag(Level level) {
  switch (level) {
    case Level::error: return "error";
    case Level::warn: return "warn";
    case Level::info: return "info";
    case Level::debug: return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() {
  static const Level value = parse_env();
  return value;
}

void message(Level level, const std::string& text) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::fprintf(stderr, "[appo-lab][%s] %s\n", tag(level), text.c_str());
}

}  // namespace appo::log
