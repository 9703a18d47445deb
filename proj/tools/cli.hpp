#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ratelim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitBreach = 3;

/// Runs the command line `args` (without the program name). Normal output goes
/// to `out`, diagnostics to `err`. Returns the process exit code.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace ratelim::cli
