#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace evdet::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

/// Runs the `evdet` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evdet::cli
