#pragma once

#include <string>
#include <string_view>

// Logging entry points for translation units that cannot include spdlog
// directly (libtorch bundles an incompatible fmt).
namespace crackbench::log {

void debug(const std::string& message);
void info(const std::string& message);
void warn(const std::string& message);
void error(const std::string& message);

/// "trace", "debug", "info", "warn", "error" or "off". Throws UsageError
/// for anything else.
void set_level(std::string_view level);

/// Routes log output to standard error. Idempotent.
void use_stderr();

/// printf-style fixed-point rendering.
std::string fixed(double value, int decimals);

} // namespace crackbench::log
