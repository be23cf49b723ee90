#pragma once

// Subcommand dispatch for the command-line front end. run_command executes
// one subcommand and throws on failure; run_cli wraps it with the stable
// error-reporting contract (prefix "ttlab error: " on stderr, exit code 0
// only on success).

#include <iosfwd>
#include <string>
#include <vector>

namespace ttlab {

inline constexpr const char* kVersion = "0.1.0";

void run_command(const std::vector<std::string>& args, std::ostream& out);

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace ttlab
