#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace seegnn::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Runs one subcommand. `args` excludes the program name. Exit codes: 0 on
// success, 1 on validation errors (one "error: Kind: message" line on err),
// 2 on internal failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seegnn::cli
