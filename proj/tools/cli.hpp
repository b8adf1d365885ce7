#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace colt::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericalFailure = 3;

/// Entry point for the `colt` command. `args[0]` is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace colt::cli
