#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pedeval {

inline constexpr std::string_view kVersion = "0.1.0";

/// Runs one command line (without the program name). Returns 0 on success,
/// 1 on a runtime error and 2 on a usage error. Errors are written to `err`
/// as one JSON line: {"error": {"kind": ..., "message": ...}}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pedeval
