#include "crackbench/log.hpp"

#include <cstdio>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "crackbench/errors.hpp"

namespace crackbench::log {

void debug(const std::string& message) { spdlog::debug(message); }
void info(const std::string& message) { spdlog::info(message); }
void warn(const std::string& message) { spdlog::warn(message); }
void error(const std::string& message) { spdlog::error(message); }

void set_level(std::string_view level) {
  const auto parsed = spdlog::level::from_str(std::string(level));
  if (parsed == spdlog::level::off && level != "off") {
    throw UsageError("unknown log level '" + std::string(level) + "'");
  }
  spdlog::set_level(parsed);
}

void use_stderr() {
  static const bool installed = [] {
    spdlog::set_default_logger(spdlog::stderr_color_mt("crackbench"));
    return true;
  }();
  (void)installed;
}

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

} // namespace crackbench::log
