#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace osda::cli {

/// Exit codes: 0 success or help, 1 usage and config errors, 2 runtime
/// failures (I/O, malformed files, numeric failures).
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace osda::cli
