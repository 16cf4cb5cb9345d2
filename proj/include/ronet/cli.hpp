#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ronet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `ronet` tool. `args` excludes the program name.
// Returns 0 on success, 2 on usage errors (unknown flags, missing paths) and
// 1 on any other failure, with a diagnostic written to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ronet
