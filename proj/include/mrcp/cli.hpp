#pragma once

#include "mrcp/error.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mrcp::cli {

/// 2 for usage, 3 for data, 4 for numerical failures.
int exit_code(ErrorCategory category);

/// One-line "error kind=... category=... message=..." record.
std::string error_line(const std::string& kind, ErrorCategory category, const std::string& message);

/// Runs one subcommand. `args` excludes the program name. Progress goes to
/// `out`, the single error line to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mrcp::cli
