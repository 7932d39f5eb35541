#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace faf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitConvergence = 4;

/// Runs one `fafscreen` invocation. `args` excludes the program name.
/// Failures print a single JSON error line to `err` and return the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace faf::cli
