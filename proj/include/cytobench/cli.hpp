#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cytobench::cli {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;  // bad flags, config or parameter files
inline constexpr int kExitData = 3;   // unreadable or unusable dataset content

// Runs one subcommand. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cytobench::cli
