#pragma once

#include <exception>
#include <iostream>
#include <string>
#include <vector>

namespace crackbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

/// Exit code for an exception escaping a command: UsageError (and argument
/// parse failures) 1, DataError and ConfigError 2, everything else 3.
int exit_code_for(const std::exception& e);

/// Runs the command line `args` (args[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
        std::ostream& err = std::cerr);

} // namespace crackbench::cli
