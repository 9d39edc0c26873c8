#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hpt::cli {

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "HPT_OUTPUT_ROOT";

/// Runs one subcommand (`args` excludes the program name). Returns 0 on
/// success, 1 for toolkit errors and 2 for usage errors; diagnostics go to
/// `err` as "Kind: message".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hpt::cli
