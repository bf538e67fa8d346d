#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tdir::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

/// Runs one command line (without the program name). Errors are reported as
/// a single `error: <kind>: <message>` line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace tdir::cli
