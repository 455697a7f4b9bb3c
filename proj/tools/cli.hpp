#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scflow::cli {

/// Stable exit-code contract of the scflow tool.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kNumeric = 4,
};

/// Runs one command line (args[0] is the program name) with output sent to
/// the given streams. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scflow::cli
